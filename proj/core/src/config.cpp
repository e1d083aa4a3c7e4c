#include "cftpmix/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace cftpmix {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_doubles(const std::string& value, const std::string& key) {
  std::vector<double> out;
  std::istringstream ss(value);
  double v;
  while (ss >> v) out.push_back(v);
  ss.clear();
  std::string leftover;
  ss >> leftover;
  if (!leftover.empty() || out.empty())
    throw usage_error("config: could not parse numeric list for '" + key + "'");
  return out;
}

std::vector<Interval> parse_intervals(const std::string& value, const std::string& key) {
  std::vector<double> nums = parse_doubles(value, key);
  if (nums.size() % 2 != 0)
    throw usage_error("config: '" + key + "' expects lo hi pairs");
  std::vector<Interval> out;
  for (std::size_t i = 0; i < nums.size(); i += 2) out.push_back({nums[i], nums[i + 1]});
  return out;
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw usage_error("config: '" + key + "' expects a boolean");
}

}  // namespace

void RunConfig::validate() const {
  if (dataset_path.empty()) throw usage_error("config: dataset path required");
  if (replicates < 0) throw usage_error("config: replicates must be nonnegative");
  if (workers < 1) throw usage_error("config: workers must be >= 1");
  if (cftp.epoch_cap < 1 || cftp.epoch_cap > 30)
    throw usage_error("config: epoch_cap must be in [1, 30]");
  switch (model) {
    case ModelKind::Finite:
      finite.validate();
      break;
    case ModelKind::FiniteTwoComp:
      finite.validate();
      if (finite.p != 2 || !finite.has_known_lambda())
        throw usage_error("config: finite-2comp requires p=2 with lambda_known");
      break;
    case ModelKind::Dp:
      dp.validate();
      break;
  }
}

RunConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw usage_error("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw usage_error("config line " + std::to_string(lineno) + ": empty key or value");
    if (kv.count(key)) throw usage_error("config: duplicate key '" + key + "'");
    kv[key] = value;
  }

  RunConfig cfg;
  auto take = [&](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return "";
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  if (std::string v = take("model"); !v.empty()) {
    if (v == "finite")
      cfg.model = ModelKind::Finite;
    else if (v == "finite-2comp")
      cfg.model = ModelKind::FiniteTwoComp;
    else if (v == "dp")
      cfg.model = ModelKind::Dp;
    else
      throw usage_error("config: unknown model '" + v + "'");
  }
  if (std::string v = take("dataset"); !v.empty()) cfg.dataset_path = v;
  if (std::string v = take("output_dir"); !v.empty()) cfg.output_dir = v;
  if (std::string v = take("seed"); !v.empty()) cfg.seed = std::stoull(v);
  if (std::string v = take("replicates"); !v.empty()) cfg.replicates = std::stoi(v);
  if (std::string v = take("workers"); !v.empty()) cfg.workers = std::stoi(v);
  if (std::string v = take("epoch_cap"); !v.empty()) cfg.cftp.epoch_cap = std::stoi(v);
  if (std::string v = take("optimizer"); !v.empty()) {
    if (v == "annealed")
      cfg.cftp.bounds.optimizer = OptimizerKind::Annealed;
    else if (v == "exact2")
      cfg.cftp.bounds.optimizer = OptimizerKind::Exact2;
    else
      throw usage_error("config: unknown optimizer '" + v + "'");
  }
  if (std::string v = take("anneal_iters"); !v.empty()) cfg.cftp.bounds.schedule.iters = std::stoi(v);
  if (std::string v = take("anneal_temp"); !v.empty())
    cfg.cftp.bounds.schedule.temp_scale = std::stod(v);
  if (std::string v = take("anneal_extension"); !v.empty())
    cfg.cftp.bounds.schedule.extension = std::stoi(v);
  if (std::string v = take("anneal_max_extensions"); !v.empty())
    cfg.cftp.bounds.schedule.max_extensions = std::stoi(v);
  if (std::string v = take("collapsed"); !v.empty()) cfg.cftp.collapsed = parse_bool(v, "collapsed");
  if (std::string v = take("tune_proposals"); !v.empty())
    cfg.cftp.tune_proposals = parse_bool(v, "tune_proposals");

  // Finite-model keys.
  if (std::string v = take("p"); !v.empty()) cfg.finite.p = std::stoi(v);
  if (std::string v = take("eta"); !v.empty()) cfg.finite.eta = cfg.dp.eta = std::stod(v);
  if (std::string v = take("zeta"); !v.empty()) cfg.finite.zeta = cfg.dp.zeta = std::stod(v);
  if (std::string v = take("xi"); !v.empty()) cfg.finite.xi = parse_doubles(v, "xi");
  if (std::string v = take("tau"); !v.empty()) cfg.finite.tau = parse_doubles(v, "tau");
  if (std::string v = take("gamma"); !v.empty()) cfg.finite.gamma = parse_doubles(v, "gamma");
  if (std::string v = take("pi_bounds"); !v.empty())
    cfg.finite.pi_bounds = parse_intervals(v, "pi_bounds");

  // Shared / dp keys.
  if (std::string v = take("M"); !v.empty()) cfg.dp.M = std::stoi(v);
  if (std::string v = take("mu0"); !v.empty()) cfg.dp.mu0 = std::stod(v);
  if (std::string v = take("psi"); !v.empty()) cfg.dp.psi = std::stod(v);
  if (std::string v = take("alpha"); !v.empty()) cfg.dp.alpha = std::stod(v);
  if (std::string v = take("alpha_random"); !v.empty())
    cfg.dp.alpha_random = parse_bool(v, "alpha_random");
  if (std::string v = take("a_alpha"); !v.empty()) cfg.dp.a_alpha = std::stod(v);
  if (std::string v = take("b_alpha"); !v.empty()) cfg.dp.b_alpha = std::stod(v);
  if (std::string v = take("alpha_bounds"); !v.empty())
    cfg.dp.alpha_bounds = parse_intervals(v, "alpha_bounds")[0];
  if (std::string v = take("truncated"); !v.empty()) cfg.dp.truncated = parse_bool(v, "truncated");
  if (std::string v = take("lambda_known"); !v.empty()) {
    std::vector<double> lk = parse_doubles(v, "lambda_known");
    cfg.finite.lambda_known = lk;
    if (lk.size() == 1) cfg.dp.lambda_known = lk[0];
  }
  if (std::string v = take("mu_bounds"); !v.empty()) {
    std::vector<Interval> iv = parse_intervals(v, "mu_bounds");
    cfg.finite.mu_bounds = iv;
    cfg.dp.mu_bounds = iv[0];
  }
  if (std::string v = take("lambda_bounds"); !v.empty()) {
    std::vector<Interval> iv = parse_intervals(v, "lambda_bounds");
    cfg.finite.lambda_bounds = iv;
    cfg.dp.lambda_bounds = iv[0];
  }

  // Baseline keys.
  if (std::string v = take("burnin"); !v.empty()) cfg.burnin = std::stoll(v);
  if (std::string v = take("keep"); !v.empty()) cfg.keep = std::stoll(v);
  if (std::string v = take("thin"); !v.empty()) cfg.thin = std::stoll(v);
  if (std::string v = take("independent_replicates"); !v.empty())
    cfg.independent_replicates = parse_bool(v, "independent_replicates");
  if (std::string v = take("gibbs_bounded"); !v.empty())
    cfg.gibbs_bounded = parse_bool(v, "gibbs_bounded");

  if (std::string v = take("pilot_sweeps"); !v.empty()) cfg.pilot_sweeps = std::stoll(v);
  if (std::string v = take("pilot_refine"); !v.empty())
    cfg.pilot_refine = parse_bool(v, "pilot_refine");

  if (std::string v = take("predictive_mode"); !v.empty()) {
    if (v == "chain")
      cfg.predictive_chain_mode = true;
    else if (v == "iid")
      cfg.predictive_chain_mode = false;
    else
      throw usage_error("config: predictive_mode must be iid or chain");
  }
  if (std::string v = take("forward_draws"); !v.empty()) cfg.forward_draws = std::stoll(v);

  if (!kv.empty()) throw usage_error("config: unknown key '" + kv.begin()->first + "'");
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt(v[i]);
  }
  return out;
}

std::string fmt_intervals(const std::vector<Interval>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt(v[i].lo) + ' ' + fmt(v[i].hi);
  }
  return out;
}

}  // namespace

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "model = "
      << (cfg.model == ModelKind::Finite
              ? "finite"
              : cfg.model == ModelKind::FiniteTwoComp ? "finite-2comp" : "dp")
      << "\n";
  out << "dataset = " << cfg.dataset_path << "\n";
  out << "output_dir = " << cfg.output_dir << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "replicates = " << cfg.replicates << "\n";
  out << "workers = " << cfg.workers << "\n";
  out << "epoch_cap = " << cfg.cftp.epoch_cap << "\n";
  out << "optimizer = "
      << (cfg.cftp.bounds.optimizer == OptimizerKind::Exact2 ? "exact2" : "annealed") << "\n";
  out << "anneal_iters = " << cfg.cftp.bounds.schedule.iters << "\n";
  out << "anneal_temp = " << fmt(cfg.cftp.bounds.schedule.temp_scale) << "\n";
  out << "anneal_extension = " << cfg.cftp.bounds.schedule.extension << "\n";
  out << "anneal_max_extensions = " << cfg.cftp.bounds.schedule.max_extensions << "\n";
  out << "collapsed = " << (cfg.cftp.collapsed ? "true" : "false") << "\n";
  out << "tune_proposals = " << (cfg.cftp.tune_proposals ? "true" : "false") << "\n";

  if (cfg.model == ModelKind::Dp) {
    out << "M = " << cfg.dp.M << "\n";
    out << "eta = " << fmt(cfg.dp.eta) << "\n";
    out << "zeta = " << fmt(cfg.dp.zeta) << "\n";
    out << "mu0 = " << fmt(cfg.dp.mu0) << "\n";
    out << "psi = " << fmt(cfg.dp.psi) << "\n";
    out << "alpha = " << fmt(cfg.dp.alpha) << "\n";
    out << "alpha_random = " << (cfg.dp.alpha_random ? "true" : "false") << "\n";
    if (cfg.dp.alpha_random) {
      out << "a_alpha = " << fmt(cfg.dp.a_alpha) << "\n";
      out << "b_alpha = " << fmt(cfg.dp.b_alpha) << "\n";
      out << "alpha_bounds = " << fmt(cfg.dp.alpha_bounds.lo) << ' ' << fmt(cfg.dp.alpha_bounds.hi)
          << "\n";
    }
    out << "truncated = " << (cfg.dp.truncated ? "true" : "false") << "\n";
    if (cfg.dp.has_known_lambda()) out << "lambda_known = " << fmt(*cfg.dp.lambda_known) << "\n";
    if (cfg.dp.truncated) {
      out << "mu_bounds = " << fmt(cfg.dp.mu_bounds.lo) << ' ' << fmt(cfg.dp.mu_bounds.hi) << "\n";
      if (!cfg.dp.has_known_lambda())
        out << "lambda_bounds = " << fmt(cfg.dp.lambda_bounds.lo) << ' '
            << fmt(cfg.dp.lambda_bounds.hi) << "\n";
    }
  } else {
    out << "p = " << cfg.finite.p << "\n";
    out << "eta = " << fmt(cfg.finite.eta) << "\n";
    out << "zeta = " << fmt(cfg.finite.zeta) << "\n";
    out << "xi = " << fmt_list(cfg.finite.xi) << "\n";
    out << "tau = " << fmt_list(cfg.finite.tau) << "\n";
    out << "gamma = " << fmt_list(cfg.finite.gamma) << "\n";
    if (cfg.finite.has_known_lambda())
      out << "lambda_known = " << fmt_list(cfg.finite.lambda_known) << "\n";
    if (!cfg.finite.mu_bounds.empty())
      out << "mu_bounds = " << fmt_intervals(cfg.finite.mu_bounds) << "\n";
    if (!cfg.finite.lambda_bounds.empty())
      out << "lambda_bounds = " << fmt_intervals(cfg.finite.lambda_bounds) << "\n";
    if (!cfg.finite.pi_bounds.empty())
      out << "pi_bounds = " << fmt_intervals(cfg.finite.pi_bounds) << "\n";
  }

  out << "burnin = " << cfg.burnin << "\n";
  out << "keep = " << cfg.keep << "\n";
  out << "thin = " << cfg.thin << "\n";
  out << "independent_replicates = " << (cfg.independent_replicates ? "true" : "false") << "\n";
  out << "gibbs_bounded = " << (cfg.gibbs_bounded ? "true" : "false") << "\n";
  out << "pilot_sweeps = " << cfg.pilot_sweeps << "\n";
  out << "pilot_refine = " << (cfg.pilot_refine ? "true" : "false") << "\n";
  out << "predictive_mode = " << (cfg.predictive_chain_mode ? "chain" : "iid") << "\n";
  out << "forward_draws = " << cfg.forward_draws << "\n";
  return out.str();
}

}  // namespace cftpmix
