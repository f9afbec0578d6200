#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "adsrank/embeddings.hpp"
#include "adsrank/error.hpp"
#include "adsrank/random.hpp"
#include "adsrank/record.hpp"
#include "adsrank/textsem.hpp"

namespace adsrank {

/// Which projection pipeline maps an image into statement space.
///
///   plain             z = normalize(P_v v)
///   fused             z = normalize(P_c [P_v v ; t])
///   partitioned       z_a = normalize(P_a v),  z_r = normalize(P_r v)
///   partitioned_fused z_a = normalize(P_a [P_v v ; t]), same for z_r
enum class ProjectionMode { plain, fused, partitioned, partitioned_fused };

inline std::string_view to_string(ProjectionMode mode) {
  switch (mode) {
    case ProjectionMode::plain: return "plain";
    case ProjectionMode::fused: return "fused";
    case ProjectionMode::partitioned: return "partitioned";
    case ProjectionMode::partitioned_fused: return "partitioned-fused";
  }
  return "plain";
}

inline ProjectionMode parse_mode(std::string_view name) {
  if (name == "plain") return ProjectionMode::plain;
  if (name == "fused") return ProjectionMode::fused;
  if (name == "partitioned") return ProjectionMode::partitioned;
  if (name == "partitioned-fused" || name == "partitioned_fused") {
    return ProjectionMode::partitioned_fused;
  }
  throw ConfigError("unknown projection mode '" + std::string(name) + "'");
}

inline bool is_fused(ProjectionMode m) {
  return m == ProjectionMode::fused || m == ProjectionMode::partitioned_fused;
}

inline bool is_partitioned(ProjectionMode m) {
  return m == ProjectionMode::partitioned || m == ProjectionMode::partitioned_fused;
}

struct ModelDims {
  std::size_t object = 0;
  std::size_t symbol = 0;
  std::size_t word = 0;
  std::size_t embed = 0;

  std::size_t visual() const { return object + symbol; }
  std::size_t fused() const { return embed + word; }

  bool operator==(const ModelDims&) const = default;
};

struct TrainConfig {
  ProjectionMode mode = ProjectionMode::plain;
  /// 0 means "use the word-embedding dimension"; any other value must equal
  /// it because image embeddings are compared against statement vectors.
  std::size_t embed_dim = 0;
  double margin = 0.2;
  double learning_rate = 0.01;
  std::size_t epochs = 50;
  std::size_t batch_size = 4;
  std::uint64_t seed = 7;

  bool operator==(const TrainConfig&) const = default;
};

/// Learned linear projections. Matrices a mode does not use are empty.
struct ProjectionModel {
  ProjectionMode mode = ProjectionMode::plain;
  ModelDims dims;
  double margin = 0.2;
  TrainConfig config;

  Eigen::MatrixXd visual_proj;  // embed x visual     (plain, fused, partitioned_fused)
  Eigen::MatrixXd fusion_proj;  // embed x fused      (fused)
  Eigen::MatrixXd action_proj;  // embed x visual|fused (partitioned modes)
  Eigen::MatrixXd reason_proj;  // embed x visual|fused (partitioned modes)

  std::vector<double> loss_trace;
};

/// Same shapes as the model's matrices; unused ones stay empty.
struct ProjectionGradient {
  Eigen::MatrixXd visual_proj;
  Eigen::MatrixXd fusion_proj;
  Eigen::MatrixXd action_proj;
  Eigen::MatrixXd reason_proj;
};

/// Output of embed_image. `joint` is set for non-partitioned modes,
/// `action`/`reason` for partitioned ones. All present vectors are unit norm
/// unless the projection collapsed to zero.
struct ImageEmbedding {
  SemVector joint;
  SemVector action;
  SemVector reason;
};

namespace detail {

inline Eigen::VectorXd mean_pool(const std::vector<Eigen::VectorXd>& patches,
                                 std::size_t dim, const char* channel) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& p : patches) {
    if (static_cast<std::size_t>(p.size()) != dim) {
      throw DimensionError(std::string(channel) + " patch has dimension " +
                           std::to_string(p.size()) + ", expected " +
                           std::to_string(dim));
    }
    sum += p;
  }
  if (!patches.empty()) sum /= static_cast<double>(patches.size());
  return sum;
}

inline std::size_t channel_dim(const std::vector<Eigen::VectorXd>& patches,
                               const char* channel) {
  if (patches.empty()) return 0;
  const auto dim = static_cast<std::size_t>(patches.front().size());
  for (const auto& p : patches) {
    if (static_cast<std::size_t>(p.size()) != dim) {
      throw DimensionError(std::string("inconsistent ") + channel +
                           " patch dimensions " + std::to_string(dim) + " and " +
                           std::to_string(p.size()));
    }
  }
  return dim;
}

}  // namespace detail

/// Mean-pools each channel and concatenates [object ; symbol]. An empty
/// channel contributes a zero block of its declared dimension.
inline Eigen::VectorXd aggregate_patches(const VisualFeatures& features,
                                         std::size_t object_dim,
                                         std::size_t symbol_dim) {
  const auto od = static_cast<Eigen::Index>(object_dim);
  const auto sd = static_cast<Eigen::Index>(symbol_dim);
  Eigen::VectorXd v(od + sd);
  v.head(od) = detail::mean_pool(features.object_patches, object_dim, "object");
  v.tail(sd) = detail::mean_pool(features.symbol_patches, symbol_dim, "symbol");
  return v;
}

/// Infers the channel dimensions from the patches themselves.
inline Eigen::VectorXd aggregate_patches(const VisualFeatures& features) {
  return aggregate_patches(features,
                           detail::channel_dim(features.object_patches, "object"),
                           detail::channel_dim(features.symbol_patches, "symbol"));
}

/// Glorot-uniform initialization of every matrix the mode needs.
inline ProjectionModel init_model(ProjectionMode mode, const ModelDims& dims,
                                  double margin, const TrainConfig& config) {
  if (dims.embed == 0 || dims.word == 0) {
    throw DimensionError("model dimensions must be positive");
  }
  if (dims.visual() == 0) throw DimensionError("model has no visual features");
  ProjectionModel model;
  model.mode = mode;
  model.dims = dims;
  model.margin = margin;
  model.config = config;
  model.config.mode = mode;

  Rng rng(config.seed);
  auto glorot = [&rng](std::size_t rows, std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-limit, limit);
    }
    return m;
  };

  const std::size_t head_in = is_fused(mode) ? dims.fused() : dims.visual();
  if (mode != ProjectionMode::partitioned) {
    model.visual_proj = glorot(dims.embed, dims.visual());
  }
  if (mode == ProjectionMode::fused) model.fusion_proj = glorot(dims.embed, head_in);
  if (is_partitioned(mode)) {
    model.action_proj = glorot(dims.embed, head_in);
    model.reason_proj = glorot(dims.embed, head_in);
  }
  return model;
}

namespace detail {

inline void check_visual(const ProjectionModel& model, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != model.dims.visual()) {
    throw DimensionError("visual vector has dimension " + std::to_string(v.size()) +
                         ", model expects " + std::to_string(model.dims.visual()) +
                         " (object " + std::to_string(model.dims.object) +
                         " + symbol " + std::to_string(model.dims.symbol) + ")");
  }
}

/// Input of the final projection head(s): v, or [P_v v ; t] for fused modes.
/// A missing text vector becomes a zero block.
inline Eigen::VectorXd head_input(const ProjectionModel& model, const Eigen::VectorXd& v,
                                  const std::optional<SemVector>& text) {
  check_visual(model, v);
  if (!is_fused(model.mode)) return v;
  const auto emb = static_cast<Eigen::Index>(model.dims.embed);
  const auto word = static_cast<Eigen::Index>(model.dims.word);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(emb + word);
  c.head(emb) = model.visual_proj * v;
  if (text) {
    if (text->size() != word) {
      throw DimensionError("scene-text vector has dimension " +
                           std::to_string(text->size()) + ", model expects " +
                           std::to_string(word));
    }
    c.tail(word) = *text;
  }
  return c;
}

inline const Eigen::MatrixXd& single_head(const ProjectionModel& model) {
  return model.mode == ProjectionMode::fused ? model.fusion_proj : model.visual_proj;
}

}  // namespace detail

inline ImageEmbedding embed_image(const ProjectionModel& model, const Eigen::VectorXd& v,
                                  const std::optional<SemVector>& text = std::nullopt) {
  const auto x = detail::head_input(model, v, text);
  ImageEmbedding out;
  if (is_partitioned(model.mode)) {
    out.action = normalized(model.action_proj * x);
    out.reason = normalized(model.reason_proj * x);
  } else {
    out.joint = normalized(detail::single_head(model) * x);
  }
  return out;
}

/// Hinge triplet loss averaged over the negatives:
///   mean_j max(0, |z - pos| - |z - neg_j| + margin)
inline double triplet_loss(const SemVector& z, const SemVector& positive,
                           const std::vector<SemVector>& negatives, double margin) {
  if (negatives.empty()) throw ConfigError("triplet_loss: no negatives");
  const double d_pos = (z - positive).norm();
  double total = 0.0;
  for (const auto& neg : negatives) {
    if (neg.size() != z.size() || positive.size() != z.size()) {
      throw DimensionError("triplet_loss: vector lengths differ");
    }
    total += std::max(0.0, d_pos - (z - neg).norm() + margin);
  }
  return total / static_cast<double>(negatives.size());
}

/// Positive and negatives for one projection head. Vectors are expected to
/// be unit-normalized statement embeddings.
struct TripletTarget {
  SemVector positive;
  std::vector<SemVector> negatives;
};

/// One training example. Non-partitioned modes read `joint`; partitioned
/// modes read `action` and `reason`.
struct TrainingSample {
  Eigen::VectorXd visual;
  std::optional<SemVector> text;
  TripletTarget joint;
  TripletTarget action;
  TripletTarget reason;
};

struct LossAndGradient {
  double loss = 0.0;
  ProjectionGradient gradient;
};

namespace detail {

/// Forward + backward of one head for one sample; returns the head loss and
/// accumulates d(loss)/d(head matrix) and d(loss)/d(head input), both scaled
/// by `scale`.
inline double head_backward(const Eigen::MatrixXd& proj, const Eigen::VectorXd& x,
                            const TripletTarget& target, double margin, double scale,
                            Eigen::MatrixXd& d_proj, Eigen::VectorXd& d_x) {
  if (target.negatives.empty()) throw ConfigError("training sample has no negatives");
  const Eigen::VectorXd u = proj * x;
  if (target.positive.size() != u.size()) {
    throw DimensionError("statement vector has dimension " +
                         std::to_string(target.positive.size()) + ", model embeds into " +
                         std::to_string(u.size()));
  }
  const double n = u.norm();
  const Eigen::VectorXd z = n > 0.0 ? Eigen::VectorXd(u / n) : u;

  const Eigen::VectorXd to_pos = z - target.positive;
  const double d_pos = to_pos.norm();
  const double inv_negs = 1.0 / static_cast<double>(target.negatives.size());

  double loss = 0.0;
  Eigen::VectorXd g_z = Eigen::VectorXd::Zero(z.size());
  for (const auto& neg : target.negatives) {
    if (neg.size() != z.size()) throw DimensionError("negative vector length differs");
    const Eigen::VectorXd to_neg = z - neg;
    const double d_neg = to_neg.norm();
    const double hinge = d_pos - d_neg + margin;
    if (hinge <= 0.0) continue;
    loss += hinge;
    if (d_pos > 0.0) g_z += to_pos / d_pos;
    if (d_neg > 0.0) g_z -= to_neg / d_neg;
  }
  loss *= inv_negs;
  g_z *= inv_negs * scale;

  if (n > 0.0) {
    // Jacobian of u -> u/|u| is (I - z z^T) / |u|.
    const Eigen::VectorXd g_u = (g_z - z * z.dot(g_z)) / n;
    d_proj.noalias() += g_u * x.transpose();
    d_x.noalias() += proj.transpose() * g_u;
  }
  return loss;
}

inline ProjectionGradient zero_gradient(const ProjectionModel& model) {
  ProjectionGradient g;
  g.visual_proj = Eigen::MatrixXd::Zero(model.visual_proj.rows(), model.visual_proj.cols());
  g.fusion_proj = Eigen::MatrixXd::Zero(model.fusion_proj.rows(), model.fusion_proj.cols());
  g.action_proj = Eigen::MatrixXd::Zero(model.action_proj.rows(), model.action_proj.cols());
  g.reason_proj = Eigen::MatrixXd::Zero(model.reason_proj.rows(), model.reason_proj.cols());
  return g;
}

}  // namespace detail

/// Mean batch loss and its exact gradient with respect to every trainable
/// matrix, back-propagated through the normalization. Hinge kinks and
/// zero distances take subgradient 0. Samples are reduced in batch order.
inline LossAndGradient loss_and_gradient(const ProjectionModel& model,
                                         const std::vector<TrainingSample>& batch) {
  if (batch.empty()) throw ConfigError("loss_gradient: empty batch");
  LossAndGradient out;
  out.gradient = detail::zero_gradient(model);
  const double scale = 1.0 / static_cast<double>(batch.size());
  const bool fused = is_fused(model.mode);

  for (const auto& sample : batch) {
    const auto x = detail::head_input(model, sample.visual, sample.text);
    Eigen::VectorXd d_x = Eigen::VectorXd::Zero(x.size());
    double loss = 0.0;
    if (is_partitioned(model.mode)) {
      loss += detail::head_backward(model.action_proj, x, sample.action, model.margin,
                                    scale, out.gradient.action_proj, d_x);
      loss += detail::head_backward(model.reason_proj, x, sample.reason, model.margin,
                                    scale, out.gradient.reason_proj, d_x);
    } else if (model.mode == ProjectionMode::fused) {
      loss += detail::head_backward(model.fusion_proj, x, sample.joint, model.margin,
                                    scale, out.gradient.fusion_proj, d_x);
    } else {
      loss += detail::head_backward(model.visual_proj, x, sample.joint, model.margin,
                                    scale, out.gradient.visual_proj, d_x);
    }
    if (fused) {
      const auto emb = static_cast<Eigen::Index>(model.dims.embed);
      out.gradient.visual_proj.noalias() += d_x.head(emb) * sample.visual.transpose();
    }
    out.loss += loss * scale;
  }
  return out;
}

inline ProjectionGradient loss_gradient(const ProjectionModel& model,
                                        const std::vector<TrainingSample>& batch) {
  return loss_and_gradient(model, batch).gradient;
}

inline double batch_loss(const ProjectionModel& model,
                         const std::vector<TrainingSample>& batch) {
  return loss_and_gradient(model, batch).loss;
}

/// Dataset-level channel dimensions (0 for a channel with no patches).
inline std::pair<std::size_t, std::size_t> feature_dims(
    const std::vector<ImageRecord>& records) {
  std::size_t obj = 0;
  std::size_t sym = 0;
  for (const auto& r : records) {
    if (obj == 0) obj = detail::channel_dim(r.features.object_patches, "object");
    if (sym == 0) sym = detail::channel_dim(r.features.symbol_patches, "symbol");
    if (obj != 0 && sym != 0) break;
  }
  return {obj, sym};
}

/// Scene-text vector fed to the fused channel: the unweighted mean of the
/// in-vocabulary scene tokens (no statement is available to guide attention
/// when the image is embedded).
inline std::optional<SemVector> fusion_text(const SceneText& scene,
                                            const EmbeddingTable& table) {
  return attended_text_embedding(scene, {}, table);
}

/// Unit-normalized statement embeddings used as triplet targets.
struct StatementTargets {
  SemVector joint;
  SemVector action;
  SemVector reason;
};

/// Absent when the statement has no in-vocabulary token. Parts without an
/// in-vocabulary token fall back to the whole statement.
inline std::optional<StatementTargets> statement_targets(const Statement& s,
                                                         const EmbeddingTable& table) {
  auto whole = mean_embed(table, s.tokens);
  if (!whole) return std::nullopt;
  StatementTargets t;
  t.joint = normalized(*whole);
  auto action = mean_embed(table, s.action_tokens);
  auto reason = mean_embed(table, s.reason_tokens);
  t.action = action ? normalized(*action) : t.joint;
  t.reason = reason ? normalized(*reason) : t.joint;
  return t;
}

/// Mini-batch gradient descent on the in-batch triplet loss.
///
/// Each epoch shuffles the samples, cuts batches of `batch_size`, and uses
/// the positives of the other batch members as negatives. A sample's
/// positive cycles through its positive statements across epochs. Batches
/// with fewer than two samples are skipped. The epoch loss (mean over the
/// samples seen, evaluated before each update) is appended to loss_trace.
inline ProjectionModel train(const std::vector<ImageRecord>& dataset,
                             const EmbeddingTable& table, const TrainConfig& config) {
  const std::size_t embed = config.embed_dim == 0 ? table.dim() : config.embed_dim;
  if (embed != table.dim()) {
    throw ConfigError("embedding dimension " + std::to_string(embed) +
                      " must equal the word-vector dimension " +
                      std::to_string(table.dim()));
  }
  if (config.batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (!(config.margin > 0.0)) throw ConfigError("margin must be positive");

  const auto [obj, sym] = feature_dims(dataset);
  ModelDims dims{obj, sym, table.dim(), embed};

  struct Prepared {
    Eigen::VectorXd visual;
    std::optional<SemVector> text;
    std::vector<StatementTargets> positives;
  };
  std::vector<Prepared> samples;
  for (const auto& record : dataset) {
    Prepared p;
    p.visual = aggregate_patches(record.features, obj, sym);
    if (is_fused(config.mode)) p.text = fusion_text(record.scene, table);
    for (const auto& s : record.statements) {
      if (!s.is_positive()) continue;
      if (auto t = statement_targets(s, table)) p.positives.push_back(std::move(*t));
    }
    if (!p.positives.empty()) samples.push_back(std::move(p));
  }
  if (samples.size() < 2) throw ConfigError("no trainable samples");

  ProjectionModel model = init_model(config.mode, dims, config.margin, config);
  model.config.embed_dim = embed;
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      if (end - start < 2) continue;

      std::vector<const StatementTargets*> picked;
      for (std::size_t k = start; k < end; ++k) {
        const auto& p = samples[order[k]];
        picked.push_back(&p.positives[epoch % p.positives.size()]);
      }
      std::vector<TrainingSample> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const auto& p = samples[order[k]];
        const std::size_t self = k - start;
        TrainingSample ts;
        ts.visual = p.visual;
        ts.text = p.text;
        ts.joint.positive = picked[self]->joint;
        ts.action.positive = picked[self]->action;
        ts.reason.positive = picked[self]->reason;
        for (std::size_t other = 0; other < picked.size(); ++other) {
          if (other == self) continue;
          ts.joint.negatives.push_back(picked[other]->joint);
          ts.action.negatives.push_back(picked[other]->action);
          ts.reason.negatives.push_back(picked[other]->reason);
        }
        batch.push_back(std::move(ts));
      }

      auto [loss, grad] = loss_and_gradient(model, batch);
      epoch_loss += loss * static_cast<double>(batch.size());
      seen += batch.size();
      const double lr = config.learning_rate;
      if (grad.visual_proj.size() != 0) model.visual_proj -= lr * grad.visual_proj;
      if (grad.fusion_proj.size() != 0) model.fusion_proj -= lr * grad.fusion_proj;
      if (grad.action_proj.size() != 0) model.action_proj -= lr * grad.action_proj;
      if (grad.reason_proj.size() != 0) model.reason_proj -= lr * grad.reason_proj;
    }
    const double mean = seen == 0 ? 0.0 : epoch_loss / static_cast<double>(seen);
    const bool finite = std::isfinite(mean) && model.visual_proj.allFinite() &&
                        model.fusion_proj.allFinite() && model.action_proj.allFinite() &&
                        model.reason_proj.allFinite();
    if (!finite) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch + 1));
    }
    model.loss_trace.push_back(mean);
  }
  return model;
}

}  // namespace adsrank
