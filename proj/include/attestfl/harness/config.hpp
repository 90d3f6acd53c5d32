#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "attestfl/adversary.hpp"
#include "attestfl/aggregation.hpp"
#include "attestfl/error.hpp"
#include "attestfl/model/dataset.hpp"

namespace attestfl {

enum class ResultFormat { kCsv, kJson };

/// 64 features of which the last 3 carry no signal (they host the trigger).
inline SyntheticSpec desk_task() {
  SyntheticSpec s;
  s.features = 64;
  s.informative = 61;
  return s;
}

inline Hyperparams desk_hyperparams() {
  Hyperparams hp;
  hp.local_epochs = 5;
  return hp;
}

struct ExperimentConfig {
  std::size_t n_clients = 20;
  std::uint32_t rounds = 15;
  PartitionMode partition = PartitionMode::kIid;

  // Task: either the synthetic generator or a pair of CSV files.
  SyntheticSpec task = desk_task();
  std::size_t samples_per_client = 80;
  std::size_t test_samples = 1000;
  std::size_t root_samples = 100;
  std::string train_csv;
  std::string test_csv;
  std::vector<std::uint32_t> hidden = {64};

  Hyperparams hp = desk_hyperparams();
  AggKind aggregator = AggKind::kFedAvg;
  std::optional<std::size_t> f;     // default: malicious count, within the rule's bound
  std::optional<std::size_t> beta;  // trimmed mean; same default
  AttackSpec attack;
  bool verification = true;
  bool check_dataset = true;
  std::uint64_t seed = 1;

  std::string output;
  ResultFormat format = ResultFormat::kCsv;
  std::string verdict_log;

  bool has_attack() const noexcept { return attack.kind != AttackKind::kNone; }

  std::size_t malicious_count() const {
    if (!has_attack()) return 0;
    return static_cast<std::size_t>(
        std::lround(attack.malicious_fraction * static_cast<double>(n_clients)));
  }

  /// f / beta as used for the full client population.
  AggRule rule() const {
    AggRule r;
    r.kind = aggregator;
    const std::size_t m = malicious_count();
    std::size_t bound = 0;
    switch (aggregator) {
      case AggKind::kKrum: bound = n_clients >= 3 ? n_clients - 3 : 0; break;
      case AggKind::kBulyan: bound = n_clients >= 3 ? (n_clients - 3) / 4 : 0; break;
      case AggKind::kTrimmedMean: bound = n_clients >= 1 ? (n_clients - 1) / 2 : 0; break;
      default: break;
    }
    r.f = f.value_or(std::min(m, bound));
    r.beta = beta.value_or(std::min(m, bound));
    return r;
  }

  void validate() const {
    if (n_clients < 1) throw ConfigInvalid("clients", "must be at least 1");
    if (rounds < 1) throw ConfigInvalid("rounds", "must be at least 1");
    if (samples_per_client < 1) throw ConfigInvalid("samples_per_client", "must be positive");
    if (test_samples < 1) throw ConfigInvalid("test_samples", "must be positive");
    if (hidden.empty()) throw ConfigInvalid("hidden", "need at least one hidden layer");
    for (auto h : hidden) {
      if (h == 0) throw ConfigInvalid("hidden", "layer width must be positive");
    }
    if (train_csv.empty() != test_csv.empty()) {
      throw ConfigInvalid(train_csv.empty() ? "train_csv" : "test_csv",
                          "train_csv and test_csv go together");
    }
    if (task.classes < 2) throw ConfigInvalid("classes", "need at least 2");
    if (task.features < 1) throw ConfigInvalid("features", "must be positive");
    if (task.informative > task.features) {
      throw ConfigInvalid("informative", "exceeds features");
    }
    if (!(task.noise >= 0.0)) throw ConfigInvalid("noise", "must be non-negative");
    try {
      hp.validate();
    } catch (const Error& e) {
      throw ConfigInvalid("hyperparameters", e.what());
    }
    if (!(attack.malicious_fraction >= 0.0 && attack.malicious_fraction < 1.0)) {
      throw ConfigInvalid("malicious_fraction", "must be in [0, 1)");
    }
    if (has_attack() && attack.malicious_fraction <= 0.0) {
      throw ConfigInvalid("malicious_fraction", "an attack needs malicious clients");
    }
    if (attack.boost && !(*attack.boost >= 0.0)) {
      throw ConfigInvalid("boost", "must be non-negative");
    }
    if (!(attack.lambda_max > 0.0)) throw ConfigInvalid("lambda_max", "must be positive");
    if (!(attack.poison_fraction > 0.0 && attack.poison_fraction <= 1.0)) {
      throw ConfigInvalid("poison_fraction", "must be in (0, 1]");
    }
    if (!(attack.lr_factor > 0.0)) throw ConfigInvalid("lr_factor", "must be positive");
    if (partition == PartitionMode::kNonIid &&
        n_clients * ((task.classes + 1) / 2) < task.classes) {
      throw ConfigInvalid("partition", "noniid needs clients * ceil(K/2) >= K");
    }
    const AggRule r = rule();
    if (!rule_admits(r, n_clients)) {
      const char* field = aggregator == AggKind::kTrimmedMean ? "beta" : "f";
      throw ConfigInvalid(field, std::string(agg_name(aggregator)) + " cannot run on " +
                                     std::to_string(n_clients) + " clients with this setting");
    }
    if (aggregator == AggKind::kFlTrust && root_samples < 1) {
      throw ConfigInvalid("root_samples", "fltrust needs a root dataset");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>) {
    r = std::from_chars(first, last, out);
  } else {
    if (!v.empty() && v.front() == '-') throw ConfigInvalid(key, "must be non-negative");
    r = std::from_chars(first, last, out);
  }
  if (r.ec != std::errc() || r.ptr != last) {
    throw ConfigInvalid(key, "not a number: '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw ConfigInvalid(key, "expected true/false, got '" + v + "'");
}

}  // namespace detail

/// Parses `key = value` lines. `#` starts a comment; values may be quoted.
/// A line may hold several comma-separated assignments, e.g.
/// `aggregator = "bulyan", f = 3`.
inline ExperimentConfig parse_config(std::istream& in) {
  using detail::parse_number;
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  auto assign = [&](const std::string& key, const std::string& v) {
    if (seen.count(key)) {
      throw ConfigInvalid(key, "set twice (lines " + std::to_string(seen[key]) + " and " +
                                   std::to_string(lineno) + ")");
    }
    seen[key] = lineno;
    if (key == "clients") {
      cfg.n_clients = parse_number<std::size_t>(key, v);
    } else if (key == "rounds") {
      cfg.rounds = parse_number<std::uint32_t>(key, v);
    } else if (key == "partition") {
      if (v == "iid") {
        cfg.partition = PartitionMode::kIid;
      } else if (v == "noniid" || v == "non-iid") {
        cfg.partition = PartitionMode::kNonIid;
      } else {
        throw ConfigInvalid(key, "expected iid or noniid");
      }
    } else if (key == "samples_per_client") {
      cfg.samples_per_client = parse_number<std::size_t>(key, v);
    } else if (key == "test_samples") {
      cfg.test_samples = parse_number<std::size_t>(key, v);
    } else if (key == "root_samples") {
      cfg.root_samples = parse_number<std::size_t>(key, v);
    } else if (key == "train_csv") {
      cfg.train_csv = v;
    } else if (key == "test_csv") {
      cfg.test_csv = v;
    } else if (key == "features") {
      cfg.task.features = parse_number<std::uint32_t>(key, v);
    } else if (key == "informative") {
      cfg.task.informative = parse_number<std::uint32_t>(key, v);
    } else if (key == "classes") {
      cfg.task.classes = parse_number<std::uint32_t>(key, v);
    } else if (key == "noise") {
      cfg.task.noise = parse_number<double>(key, v);
    } else if (key == "mean_range") {
      cfg.task.mean_range = parse_number<double>(key, v);
    } else if (key == "task_seed") {
      cfg.task.seed = parse_number<std::uint64_t>(key, v);
    } else if (key == "hidden") {
      cfg.hidden.clear();
      std::string list = v;
      std::replace(list.begin(), list.end(), ',', ':');
      std::stringstream ss(list);
      std::string part;
      while (std::getline(ss, part, ':')) {
        cfg.hidden.push_back(parse_number<std::uint32_t>(key, detail::trim(part)));
      }
    } else if (key == "learning_rate") {
      cfg.hp.learning_rate = parse_number<double>(key, v);
    } else if (key == "epochs") {
      cfg.hp.local_epochs = parse_number<std::uint32_t>(key, v);
    } else if (key == "batch_size") {
      cfg.hp.batch_size = parse_number<std::uint32_t>(key, v);
    } else if (key == "optimizer") {
      if (v == "adam") {
        cfg.hp.optimizer = OptimizerKind::kAdam;
      } else if (v == "sgd") {
        cfg.hp.optimizer = OptimizerKind::kSgd;
      } else {
        throw ConfigInvalid(key, "expected adam or sgd");
      }
    } else if (key == "beta1") {
      cfg.hp.beta1 = parse_number<double>(key, v);
    } else if (key == "beta2") {
      cfg.hp.beta2 = parse_number<double>(key, v);
    } else if (key == "epsilon") {
      cfg.hp.epsilon = parse_number<double>(key, v);
    } else if (key == "aggregator") {
      auto k = parse_agg_kind(v);
      if (!k) throw ConfigInvalid(key, "unknown aggregator '" + v + "'");
      cfg.aggregator = *k;
    } else if (key == "f") {
      cfg.f = parse_number<std::size_t>(key, v);
    } else if (key == "beta") {
      cfg.beta = parse_number<std::size_t>(key, v);
    } else if (key == "attack") {
      auto k = parse_attack_kind(v);
      if (!k) throw ConfigInvalid(key, "unknown attack '" + v + "'");
      cfg.attack.kind = *k;
    } else if (key == "malicious_fraction") {
      cfg.attack.malicious_fraction = parse_number<double>(key, v);
    } else if (key == "boost") {
      cfg.attack.boost = parse_number<double>(key, v);
    } else if (key == "lambda_max") {
      cfg.attack.lambda_max = parse_number<double>(key, v);
    } else if (key == "poison_fraction") {
      cfg.attack.poison_fraction = parse_number<double>(key, v);
    } else if (key == "static_mode") {
      if (v == "lr") {
        cfg.attack.static_mode = StaticTamper::kLearningRate;
      } else if (v == "dataset") {
        cfg.attack.static_mode = StaticTamper::kDataset;
      } else {
        throw ConfigInvalid(key, "expected lr or dataset");
      }
    } else if (key == "lr_factor") {
      cfg.attack.lr_factor = parse_number<double>(key, v);
    } else if (key == "verification") {
      cfg.verification = detail::parse_bool(key, v);
    } else if (key == "check_dataset") {
      cfg.check_dataset = detail::parse_bool(key, v);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, v);
    } else if (key == "output") {
      cfg.output = v;
    } else if (key == "format") {
      if (v == "csv") {
        cfg.format = ResultFormat::kCsv;
      } else if (v == "json") {
        cfg.format = ResultFormat::kJson;
      } else {
        throw ConfigInvalid(key, "expected csv or json");
      }
    } else if (key == "verdict_log") {
      cfg.verdict_log = v;
    } else {
      throw ConfigInvalid(key, "unknown key");
    }
  };

  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments outside quotes, then split on commas outside quotes.
    std::vector<std::string> parts;
    std::string cur;
    char quote = 0;
    for (char c : line) {
      if (quote) {
        if (c == quote) quote = 0;
        cur += c;
      } else if (c == '"' || c == '\'') {
        quote = c;
        cur += c;
      } else if (c == '#') {
        break;
      } else if (c == ',') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (quote) {
      throw ConfigInvalid("line " + std::to_string(lineno), "unterminated quote");
    }
    parts.push_back(cur);
    for (const auto& raw : parts) {
      const std::string part = detail::trim(raw);
      if (part.empty()) continue;
      const auto eq = part.find('=');
      if (eq == std::string::npos) {
        throw ConfigInvalid("line " + std::to_string(lineno), "expected key = value");
      }
      const std::string key = detail::trim(part.substr(0, eq));
      const std::string value = detail::unquote(detail::trim(part.substr(eq + 1)));
      if (key.empty()) {
        throw ConfigInvalid("line " + std::to_string(lineno), "missing key");
      }
      assign(key, value);
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("config", "cannot open '" + path + "'");
  return parse_config(in);
}

}  // namespace attestfl
