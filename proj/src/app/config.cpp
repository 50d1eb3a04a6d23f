#include "cl2o/app/config.hpp"

#include "cl2o/data/binary_io.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace cl2o {

const std::vector<ConfigKey>& config_registry() {
  static const std::vector<ConfigKey> keys = {
      {"task", "quadratic", "quadratic | classifier"},
      {"seed", "0", "master seed"},
      {"out", "cl2o-out", "output directory"},
      {"jobs", "0", "worker threads (0 = logical cores)"},

      {"quadratic.dim", "10", "dimension of the quadratic family"},
      {"quadratic.kappa_lo", "2", "condition number range, lower end"},
      {"quadratic.kappa_hi", "10", "condition number range, upper end"},
      {"quadratic.trig", "true", "mix in trig-perturbed quadratics on odd seeds"},
      {"trig.amplitude", "0.1", "trig perturbation amplitude"},
      {"trig.frequency", "2", "trig perturbation frequency"},

      {"data.dir", "", "directory with MNIST IDX files (CL2O_DATA_DIR overrides)"},
      {"data.train_images", "2000", "training images"},
      {"data.eval_images", "500", "evaluation images"},
      {"data.meta_fraction", "0.8", "share of training images used to optimize theta"},
      {"data.separation", "0.7", "class separation of the synthetic fallback"},
      {"data.seed", "0", "seed of the synthetic fallback and the minibatch partition"},
      {"classifier.activation", "tanh", "tanh | sigmoid | relu"},
      {"classifier.minibatch", "128", "minibatch size"},

      {"init.kind", "uniform", "uniform | gaussian"},
      {"init.low", "0", "uniform initialization, lower end"},
      {"init.high", "0.01", "uniform initialization, upper end"},
      {"init.stddev", "0.1", "gaussian initialization, standard deviation"},

      {"innovation.n", "3", "state dimension per layer"},
      {"innovation.r", "3", "number of layers"},
      {"innovation.gamma", "0.95", "contraction bound"},
      {"innovation.hidden", "16", "hidden width of the feature network"},
      {"innovation.state_activation", "tanh", "tanh | identity"},
      {"innovation.param_scale", "0.1", "standard deviation of the initial parameters"},

      {"rule.eta_factor", "0.9", "quadratic task: eta = eta_factor / beta"},
      {"rule.eta0", "auto", "classifier task: eta_e = eta0 / (e + 1)^power (auto = tuned SGD rate)"},
      {"rule.power", "1", "stepsize decay exponent"},
      {"rule.unsafe_stepsize", "false", "allow eta >= 1/beta"},

      {"meta.horizon", "50", "unrolled steps T"},
      {"meta.decay", "0.95", "gamma_t = decay^(T - t)"},
      {"meta.alpha", "0", "weight of |grad f|^2"},
      {"meta.episodes", "10", "episodes per estimate"},
      {"meta.epochs", "40", "outer Adam steps"},
      {"meta.outer_lr", "0.01", "outer Adam learning rate"},
      {"meta.truncation", "0", "cut the unrolled graph every k steps (0 = full)"},

      {"tune.grid", "auto", "comma list of learning rates (auto = 1e-4..1, or 1e-4..1e2 for the classifier)"},
      {"tune.budget", "20", "steps T at which f(x_T) is compared"},
      {"tune.starts", "5", "initializations averaged per grid point"},

      {"evaluate.episodes", "10", "held-out episodes"},
      {"bench.steps", "100", "steps per run"},
      {"bench.seeds", "10", "paired runs per method"},
      {"bench.report_steps", "20,100", "steps reported in the summary"},
      {"bench.baselines", "sgd,nag,adam,rmsprop", "comma list of baselines"},

      {"verify.source", "auto", "gd | heavy-ball | nag | learned | trajectory (auto picks learned with a checkpoint)"},
      {"verify.trajectory", "", "trajectory file for source = trajectory"},
      {"verify.steps", "1000", "rollout length"},
      {"verify.dim", "10", "dimension of the test quadratic"},
      {"verify.kappa", "10", "condition number of the test quadratic"},
      {"verify.eta_factor", "0.9", "eta = eta_factor / beta"},
      {"verify.tail_fraction", "0.1", "share of the horizon in the tail check"},
      {"verify.tail_tolerance", "1e-6", "tail energy bound relative to the total"},
      {"verify.equivalence_tol", "1e-10", "replay deviation bound"},

      {"inspect.trajectory", "", "trajectory file to summarize"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_registry()) values_.emplace_back(k.default_value);
}

std::size_t RunConfig::index_of(const std::string& key) const {
  const auto& reg = config_registry();
  for (std::size_t i = 0; i < reg.size(); ++i) {
    if (key == reg[i].name) return i;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  try {
    kv = KeyValues::parse(text, origin);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  RunConfig cfg;
  for (const auto& [k, v] : kv.entries()) {
    try {
      cfg.set(k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::string text;
  try {
    text = bin::read_file_bytes(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse(text, path);
}

void RunConfig::set(const std::string& key, const std::string& value) { values_[index_of(key)] = value; }

const std::string& RunConfig::get(const std::string& key) const { return values_[index_of(key)]; }

double RunConfig::get_double(const std::string& key) const {
  try {
    return parse_double(get(key), "config key '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& s = get(key);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + s + "'");
  }
  return v;
}

std::size_t RunConfig::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + s + "'");
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    try {
      out.push_back(parse_double(item.substr(b, e - b + 1), "config key '" + key + "'"));
    } catch (const Error& err) {
      throw ConfigError(err.what());
    }
  }
  return out;
}

std::string RunConfig::str() const {
  std::string out;
  const auto& reg = config_registry();
  for (std::size_t i = 0; i < reg.size(); ++i) out += std::string(reg[i].name) + " = " + values_[i] + "\n";
  return out;
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv;
  const auto& reg = config_registry();
  for (std::size_t i = 0; i < reg.size(); ++i) kv.set(reg[i].name, values_[i]);
  return kv;
}

std::string RunConfig::hash() const { return fnv1a_hex(str()); }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cl2o
