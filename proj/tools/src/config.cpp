#include <cmath>
#include <limits>

#include "app.hpp"
#include "foda/error.hpp"
#include "foda/io.hpp"

namespace foda::app {

json default_config() {
  return json::parse(R"({
  "seed": 42,
  "paths": {"out_dir": "runs/default"},
  "corpus": {
    "n_studies": 500,
    "n_test": 100,
    "val_fraction": 0.1,
    "zipf_exponent": 1.2,
    "mean_findings": 1.2,
    "negation_prob": 0.8,
    "regions": 16,
    "visual_dim": 32,
    "noise": 0.3,
    "signature_seed": 7,
    "min_freq": 1,
    "max_len": 128,
    "organs": null
  },
  "ontology": {
    "alpha": 1,
    "beta": null,
    "gamma": 0.9,
    "delta": 0.5,
    "negation_cues": ["no", "normal", "without", "clear", "free"],
    "lexicon": null,
    "feature_dim": 32
  },
  "model": {
    "d_L": 32,
    "d_e": 32,
    "d_h": 64,
    "gcn_layers": 2,
    "activation": "relu",
    "heads": 0,
    "measure": "dot"
  },
  "train": {
    "epochs": 20,
    "batch": 8,
    "lr_encoder": 0.001,
    "lr_rest": 0.01,
    "weight_decay": 0.01,
    "stop_loss": null,
    "threads": 0,
    "beam": 1,
    "length_norm": false,
    "max_len": 128
  },
  "rl": {
    "steps": 0,
    "M": 8,
    "reward": "bleu4",
    "lr": 0.001,
    "baseline": false
  }
})");
}

namespace {

void merge_into(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError("config: " + (where.empty() ? "root" : where) + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    json& dst = base[it.key()];
    if (dst.is_object() && it.value().is_object()) {
      merge_into(dst, it.value(), key);
    } else {
      dst = it.value();
    }
  }
}

}  // namespace

json load_config(const fs::path& file, const std::vector<std::pair<std::string, std::string>>& overrides) {
  json cfg = default_config();
  if (!file.empty()) {
    const std::string text = read_text_file(file);
    json patch;
    try {
      patch = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError("config: " + file.string() + " is not valid JSON: " + e.what());
    }
    merge_into(cfg, patch, "");
  }
  for (const auto& [key, value] : overrides) {
    json* node = &cfg;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(part)) throw ConfigError("config: unknown key '" + key + "'");
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (node->is_object()) throw ConfigError("config: '" + key + "' is a section, not a value");
    try {
      *node = json::parse(value);
    } catch (const json::exception&) {
      *node = value;
    }
  }
  return cfg;
}

namespace {

template <class T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + section + "." + key + ": " + e.what());
  }
}

std::size_t get_count(const json& j, const char* section, const char* key) {
  const json& v = j.at(section).at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(std::string("config: ") + section + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

Pipeline Pipeline::from_json(const json& cfg) {
  Pipeline p;
  p.raw = cfg;
  try {
    p.seed = cfg.at("seed").get<std::uint64_t>();
    p.out_dir = cfg.at("paths").at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  GeneratorConfig g = GeneratorConfig::defaults();
  g.n_studies = get_count(cfg, "corpus", "n_studies");
  g.zipf_exponent = get<double>(cfg, "corpus", "zipf_exponent");
  g.mean_findings = get<double>(cfg, "corpus", "mean_findings");
  g.negation_prob = get<double>(cfg, "corpus", "negation_prob");
  g.regions = get_count(cfg, "corpus", "regions");
  g.visual_dim = get_count(cfg, "corpus", "visual_dim");
  g.noise = get<double>(cfg, "corpus", "noise");
  g.signature_seed = get<std::uint64_t>(cfg, "corpus", "signature_seed");
  if (const json& organs = cfg.at("corpus").at("organs"); !organs.is_null()) {
    g.organs.clear();
    try {
      for (auto it = organs.begin(); it != organs.end(); ++it)
        g.organs.push_back({it.key(), it.value().get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: corpus.organs: ") + e.what());
    }
  }
  g.validate();
  p.generator = g;
  p.n_test = get_count(cfg, "corpus", "n_test");
  p.val_fraction = get<double>(cfg, "corpus", "val_fraction");
  p.min_freq = get_count(cfg, "corpus", "min_freq");
  p.max_len = get_count(cfg, "corpus", "max_len");
  if (p.n_test >= g.n_studies) throw ConfigError("config: corpus.n_test must be below corpus.n_studies");
  if (!(p.val_fraction >= 0.0 && p.val_fraction < 1.0)) throw ConfigError("config: corpus.val_fraction must be in [0, 1)");
  if (p.min_freq == 0) throw ConfigError("config: corpus.min_freq must be >= 1");
  if (p.max_len == 0) throw ConfigError("config: corpus.max_len must be >= 1");

  OntologyConfig o;
  o.alpha = get<std::int64_t>(cfg, "ontology", "alpha");
  const json& beta = cfg.at("ontology").at("beta");
  o.beta = beta.is_null() ? std::numeric_limits<std::int64_t>::max() : get<std::int64_t>(cfg, "ontology", "beta");
  o.gamma = get<double>(cfg, "ontology", "gamma");
  o.negation_cues = get<std::vector<std::string>>(cfg, "ontology", "negation_cues");
  o.lexicon = Lexicon::from_generator(g);
  o.validate();
  p.ontology = o;
  if (const json& lex = cfg.at("ontology").at("lexicon"); !lex.is_null()) p.lexicon_path = lex.get<std::string>();
  p.graph.delta = get<double>(cfg, "ontology", "delta");
  p.graph.feature_dim = get_count(cfg, "ontology", "feature_dim");
  p.graph.seed = p.seed;
  if (!(p.graph.delta > 0.0 && p.graph.delta <= 1.0)) throw ConfigError("config: ontology.delta must be in (0, 1]");
  if (p.graph.feature_dim == 0) throw ConfigError("config: ontology.feature_dim must be >= 1");

  ModelConfig m;
  m.vocab_size = 5;  // placeholder until the vocabulary exists
  m.d_v = g.visual_dim;
  m.node_dim = p.graph.feature_dim;
  m.d_L = get_count(cfg, "model", "d_L");
  m.d_e = get_count(cfg, "model", "d_e");
  m.d_h = get_count(cfg, "model", "d_h");
  m.gcn_layers = get_count(cfg, "model", "gcn_layers");
  m.gcn_activation = ad::activation_from_string(get<std::string>(cfg, "model", "activation"));
  m.heads = get_count(cfg, "model", "heads");
  m.measure = measure_from_string(get<std::string>(cfg, "model", "measure"));
  m.validate();
  p.model = m;

  TrainConfig t;
  t.epochs = get_count(cfg, "train", "epochs");
  t.batch = get_count(cfg, "train", "batch");
  t.lr_encoder = get<double>(cfg, "train", "lr_encoder");
  t.lr_rest = get<double>(cfg, "train", "lr_rest");
  t.weight_decay = get<double>(cfg, "train", "weight_decay");
  if (const json& sl = cfg.at("train").at("stop_loss"); !sl.is_null()) t.stop_loss = sl.get<double>();
  t.threads = get_count(cfg, "train", "threads");
  t.max_len = get_count(cfg, "train", "max_len");
  t.seed = p.seed;
  if (t.epochs == 0) throw ConfigError("config: train.epochs must be >= 1");
  if (t.batch == 0) throw ConfigError("config: train.batch must be >= 1");
  if (t.lr_encoder < 0 || t.lr_rest < 0) throw ConfigError("config: learning rates must be >= 0");
  p.train = t;
  p.beam = get_count(cfg, "train", "beam");
  if (p.beam == 0) throw ConfigError("config: train.beam must be >= 1");
  p.length_norm = get<bool>(cfg, "train", "length_norm");

  p.rl_steps = get_count(cfg, "rl", "steps");
  p.rl.M = get_count(cfg, "rl", "M");
  p.rl.reward = reward_from_string(get<std::string>(cfg, "rl", "reward"));
  p.rl.lr = get<double>(cfg, "rl", "lr");
  p.rl.baseline = get<bool>(cfg, "rl", "baseline");
  p.rl.seed = p.seed;
  p.rl.max_len = t.max_len;
  p.rl.validate();
  return p;
}

std::string Pipeline::hash() const { return content_digest(raw.dump()); }

}  // namespace foda::app
