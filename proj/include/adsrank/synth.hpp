#pragma once

#include <cctype>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adsrank/dataio.hpp"
#include "adsrank/embeddings.hpp"
#include "adsrank/error.hpp"
#include "adsrank/evaluator.hpp"
#include "adsrank/random.hpp"
#include "adsrank/record.hpp"

namespace adsrank {

/// Topic-model generator for desk-scale end-to-end checks.
///
/// Each topic k owns a unit vector u_k, a set of verbs and a set of content
/// words whose embeddings are u_k plus N(0, noise_sigma^2) noise. An image of
/// topic k gets visual patches B u_k + N(0, visual_noise^2) (B a fixed random
/// basis), scene tokens drawn from the topic vocabulary with per-token
/// dropout, and statements "i should <verb> <word> because <words...>":
/// positives from topic k, negatives from other topics. The function words
/// "i", "should" and "because" are left out of the embedding table.
///
/// With independent_parts the action and reason halves of an image draw
/// from two independent topics, and the visual signal is the sum of one
/// basis image per half. Negatives then differ from the positive pair in at
/// least one half.
struct SynthConfig {
  std::size_t num_images = 200;
  std::size_t num_topics = 5;
  std::size_t word_dim = 16;
  std::size_t object_dim = 12;
  std::size_t symbol_dim = 8;
  std::size_t statements_per_image = 15;
  std::size_t positives_per_image = 3;
  double noise_sigma = 0.05;
  double ocr_dropout = 0.1;
  std::uint64_t seed = 7;

  double visual_noise = 0.4;
  std::size_t object_patches = 3;
  std::size_t symbol_patches = 2;
  std::size_t max_scene_tokens = 4;
  std::size_t verbs_per_topic = 4;
  std::size_t words_per_topic = 12;
  bool independent_parts = false;
};

struct StatementTruth {
  std::size_t action_topic = 0;
  std::size_t reason_topic = 0;
  bool positive = false;
};

/// Generator latents for one image. `order[p]` is the generation slot that
/// ended up at position p; slots [0, positives_per_image) are the positives.
struct ImageTruth {
  std::string id;
  std::size_t action_topic = 0;
  std::size_t reason_topic = 0;
  std::vector<StatementTruth> statements;  // in final (shuffled) order
  std::vector<std::size_t> order;
};

struct GroundTruth {
  std::vector<Eigen::VectorXd> topics;
  Eigen::MatrixXd action_basis;  // (object + symbol) x word
  Eigen::MatrixXd reason_basis;  // used only with independent_parts
  std::vector<ImageTruth> images;
  std::size_t positives_per_image = 0;
};

struct SynthDataset {
  std::vector<ImageRecord> records;
  EmbeddingTable embeddings{1};
  GoldSets gold;
  GroundTruth truth;
};

namespace detail {

inline std::string pseudo_word(Rng& rng) {
  static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                            "p", "r", "s", "t", "v", "z", "br", "st"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::string w;
  const std::size_t syllables = 2 + rng.index(2);
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kOnsets[rng.index(std::size(kOnsets))];
    w += kVowels[rng.index(std::size(kVowels))];
  }
  return w;
}

struct TopicVocab {
  std::vector<std::string> verbs;
  std::vector<std::string> words;
};

}  // namespace detail

inline void validate(const SynthConfig& c) {
  if (c.num_images == 0) throw ConfigError("synth: num_images must be positive");
  if (c.num_topics == 0) throw ConfigError("synth: num_topics must be positive");
  if (c.word_dim < 2 || c.object_dim < 2 || c.symbol_dim < 2) {
    throw ConfigError("synth: dimensions must be at least 2");
  }
  if (c.positives_per_image == 0 || c.positives_per_image >= c.statements_per_image) {
    throw ConfigError("synth: need 0 < positives_per_image < statements_per_image");
  }
  if (c.noise_sigma < 0.0 || c.visual_noise < 0.0) throw ConfigError("synth: negative noise");
  if (c.ocr_dropout < 0.0 || c.ocr_dropout > 1.0) throw ConfigError("synth: dropout must be in [0,1]");
  if (c.verbs_per_topic == 0 || c.words_per_topic == 0 || c.max_scene_tokens == 0) {
    throw ConfigError("synth: vocabulary and scene sizes must be positive");
  }
  if (c.object_patches == 0 && c.symbol_patches == 0) {
    throw ConfigError("synth: images need at least one patch");
  }
}

inline SynthDataset generate(const SynthConfig& config) {
  validate(config);
  Rng rng(config.seed);
  const auto wd = static_cast<Eigen::Index>(config.word_dim);
  const auto vd = static_cast<Eigen::Index>(config.object_dim + config.symbol_dim);
  const std::size_t T = config.num_topics;

  SynthDataset out;
  out.truth.positives_per_image = config.positives_per_image;

  for (std::size_t k = 0; k < T; ++k) {
    Eigen::VectorXd u(wd);
    for (Eigen::Index i = 0; i < wd; ++i) u[i] = rng.normal();
    out.truth.topics.push_back(normalized(u));
  }

  std::set<std::string> used{"i", "should", "because"};
  auto fresh_word = [&]() {
    for (;;) {
      auto w = detail::pseudo_word(rng);
      if (used.insert(w).second) return w;
    }
  };
  EmbeddingTable table(config.word_dim);
  std::vector<detail::TopicVocab> vocab(T);
  auto embed_word = [&](const std::string& w, std::size_t topic) {
    Eigen::VectorXd e = out.truth.topics[topic];
    for (Eigen::Index i = 0; i < wd; ++i) e[i] += config.noise_sigma * rng.normal();
    table.insert(w, std::move(e));
  };
  for (std::size_t k = 0; k < T; ++k) {
    for (std::size_t i = 0; i < config.verbs_per_topic; ++i) {
      vocab[k].verbs.push_back(fresh_word());
      embed_word(vocab[k].verbs.back(), k);
    }
    for (std::size_t i = 0; i < config.words_per_topic; ++i) {
      vocab[k].words.push_back(fresh_word());
      embed_word(vocab[k].words.back(), k);
    }
  }

  auto basis = [&]() {
    Eigen::MatrixXd b(vd, wd);
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.word_dim));
    for (Eigen::Index c = 0; c < wd; ++c) {
      for (Eigen::Index r = 0; r < vd; ++r) b(r, c) = scale * rng.normal();
    }
    return b;
  };
  out.truth.action_basis = basis();
  if (config.independent_parts) out.truth.reason_basis = basis();

  auto pick = [&rng](const std::vector<std::string>& v) -> const std::string& {
    return v[rng.index(v.size())];
  };
  auto make_text = [&](std::size_t action_topic, std::size_t reason_topic) {
    std::string text = "i should " + pick(vocab[action_topic].verbs) + " " +
                       pick(vocab[action_topic].words) + " because";
    const std::size_t n = 2 + rng.index(2);
    for (std::size_t i = 0; i < n; ++i) text += " " + pick(vocab[reason_topic].words);
    return text;
  };
  auto other_topic = [&](std::size_t k) {
    if (T == 1) return k;
    std::size_t m = rng.index(T - 1);
    return m >= k ? m + 1 : m;
  };

  const int id_width = static_cast<int>(std::to_string(config.num_images).size());
  for (std::size_t n = 0; n < config.num_images; ++n) {
    ImageTruth truth;
    std::ostringstream id;
    id << "img" << std::setw(id_width) << std::setfill('0') << n;
    truth.id = id.str();
    truth.action_topic = rng.index(T);
    truth.reason_topic = config.independent_parts ? rng.index(T) : truth.action_topic;

    ImageRecord rec;
    rec.id = truth.id;

    Eigen::VectorXd signal = out.truth.action_basis * out.truth.topics[truth.action_topic];
    if (config.independent_parts) {
      signal += out.truth.reason_basis * out.truth.topics[truth.reason_topic];
    }
    auto patch = [&](Eigen::Index offset, Eigen::Index len) {
      Eigen::VectorXd p = signal.segment(offset, len);
      for (Eigen::Index i = 0; i < len; ++i) p[i] += config.visual_noise * rng.normal();
      return p;
    };
    const auto od = static_cast<Eigen::Index>(config.object_dim);
    const auto sd = static_cast<Eigen::Index>(config.symbol_dim);
    for (std::size_t i = 0; i < config.object_patches; ++i) {
      rec.features.object_patches.push_back(patch(0, od));
    }
    for (std::size_t i = 0; i < config.symbol_patches; ++i) {
      rec.features.symbol_patches.push_back(patch(od, sd));
    }

    const std::size_t n_tokens = 1 + rng.index(config.max_scene_tokens);
    for (std::size_t i = 0; i < n_tokens; ++i) {
      // Alternate halves so both topics appear when they differ.
      const std::size_t topic = (i % 2 == 0) ? truth.action_topic : truth.reason_topic;
      const auto& pool = rng.bernoulli(0.25) ? vocab[topic].verbs : vocab[topic].words;
      std::string tok = pick(pool);
      if (rng.bernoulli(0.3)) tok[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(tok[0])));
      if (!rng.bernoulli(config.ocr_dropout)) rec.scene.tokens.push_back(std::move(tok));
    }

    std::vector<StatementTruth> slots;
    std::vector<std::string> texts;
    for (std::size_t q = 0; q < config.statements_per_image; ++q) {
      StatementTruth st;
      st.positive = q < config.positives_per_image;
      if (st.positive) {
        st.action_topic = truth.action_topic;
        st.reason_topic = truth.reason_topic;
      } else if (config.independent_parts && T > 1) {
        do {
          st.action_topic = rng.index(T);
          st.reason_topic = rng.index(T);
        } while (st.action_topic == truth.action_topic &&
                 st.reason_topic == truth.reason_topic);
      } else {
        st.action_topic = other_topic(truth.action_topic);
        st.reason_topic = st.action_topic;
      }
      texts.push_back(make_text(st.action_topic, st.reason_topic));
      slots.push_back(st);
    }

    truth.order.resize(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) truth.order[i] = i;
    rng.shuffle(truth.order);
    std::set<std::size_t> gold;
    for (std::size_t p = 0; p < slots.size(); ++p) {
      const auto& st = slots[truth.order[p]];
      truth.statements.push_back(st);
      rec.statements.push_back(
          make_statement(texts[truth.order[p]], st.positive ? Label::positive : Label::negative));
      if (st.positive) gold.insert(p);
    }
    out.gold[rec.id] = std::move(gold);
    out.records.push_back(std::move(rec));
    out.truth.images.push_back(std::move(truth));
  }
  out.embeddings = std::move(table);
  return out;
}

/// Positions of the statements generated as positives from the image's own
/// topic(s); equal to the gold set by construction.
inline std::set<std::size_t> oracle_best_match(const GroundTruth& truth, const std::string& id) {
  for (const auto& img : truth.images) {
    if (img.id != id) continue;
    std::set<std::size_t> out;
    for (std::size_t p = 0; p < img.statements.size(); ++p) {
      const auto& st = img.statements[p];
      if (st.positive && st.action_topic == img.action_topic &&
          st.reason_topic == img.reason_topic) {
        out.insert(p);
      }
    }
    return out;
  }
  throw NotFoundError("unknown image id '" + id + "'");
}

inline json gold_to_json(const SynthDataset& ds) {
  json images = json::array();
  for (const auto& img : ds.truth.images) {
    json j;
    j["id"] = img.id;
    const auto& g = ds.gold.at(img.id);
    j["positives"] = std::vector<std::size_t>(g.begin(), g.end());
    j["action_topic"] = img.action_topic;
    j["reason_topic"] = img.reason_topic;
    j["order"] = img.order;
    images.push_back(std::move(j));
  }
  return json{{"images", std::move(images)}};
}

/// Writes data.jsonl, embeddings.txt and gold.json into `dir`. With
/// holdout > 0 the last `holdout` images also go to test.jsonl and the rest
/// to train.jsonl.
inline void write_synth(const std::filesystem::path& dir, const SynthDataset& ds,
                        std::size_t holdout = 0) {
  std::filesystem::create_directories(dir);
  save_dataset((dir / "data.jsonl").string(), ds.records);
  save_embeddings((dir / "embeddings.txt").string(), ds.embeddings);
  {
    std::ofstream out(dir / "gold.json");
    if (!out) throw NotFoundError("cannot write " + (dir / "gold.json").string());
    out << gold_to_json(ds).dump(1) << '\n';
  }
  if (holdout > 0) {
    if (holdout >= ds.records.size()) throw ConfigError("synth: holdout must be smaller than the dataset");
    const auto split = static_cast<std::ptrdiff_t>(ds.records.size() - holdout);
    save_dataset((dir / "train.jsonl").string(),
                 {ds.records.begin(), ds.records.begin() + split});
    save_dataset((dir / "test.jsonl").string(), {ds.records.begin() + split, ds.records.end()});
  }
}

}  // namespace adsrank
