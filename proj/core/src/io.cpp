#include "cftpmix/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace cftpmix {

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw usage_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw usage_error("write failed for '" + path + "'");
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("dataset: cannot open '" + path + "'");
  Dataset data;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Tolerate single-column CSV with a trailing comma or CR.
    while (!line.empty() && (line.back() == '\r' || line.back() == ',')) line.pop_back();
    std::string trimmed;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) trimmed += c;
    if (trimmed.empty()) continue;
    try {
      std::size_t used = 0;
      double v = std::stod(trimmed, &used);
      if (used != trimmed.size()) throw std::invalid_argument("trailing characters");
      data.y.push_back(v);
    } catch (const std::exception&) {
      throw usage_error("dataset '" + path + "' line " + std::to_string(lineno) +
                        ": cannot parse '" + line + "'");
    }
  }
  data.validate();
  return data;
}

namespace {

std::string coalescence_csv(const RunOutputs& outputs) {
  std::ostringstream out;
  out << "replicate,seed,epoch,t_star,steps_to_zero,backward_steps\n";
  auto row = [&](std::size_t r, std::uint64_t seed, const CoalescenceRecord& rec) {
    out << r << ',' << seed << ',' << rec.epoch << ',' << rec.t_star << ',' << rec.steps_to_zero
        << ',' << rec.backward_steps << "\n";
  };
  for (std::size_t r = 0; r < outputs.finite_samples.size(); ++r)
    row(r, outputs.finite_samples[r].seed, outputs.finite_samples[r].record);
  for (std::size_t r = 0; r < outputs.dp_samples.size(); ++r)
    row(r, outputs.dp_samples[r].seed, outputs.dp_samples[r].record);
  return out.str();
}

}  // namespace

std::string finite_samples_csv(const RunConfig& config, const std::vector<FinitePerfectSample>& s) {
  std::ostringstream out;
  const int p = config.finite.p;
  out << "replicate,seed,t_star,steps_to_zero";
  int n = s.empty() ? 0 : static_cast<int>(s.front().state.z.size());
  for (int i = 0; i < n; ++i) out << ",z" << i + 1;
  for (int j = 0; j < p; ++j) out << ",pi" << j + 1;
  for (int j = 0; j < p; ++j) out << ",mu" << j + 1;
  for (int j = 0; j < p; ++j) out << ",lambda" << j + 1;
  out << "\n";
  for (std::size_t r = 0; r < s.size(); ++r) {
    const auto& ps = s[r];
    out << r << ',' << ps.seed << ',' << ps.record.t_star << ',' << ps.record.steps_to_zero;
    for (int zi : ps.state.z) out << ',' << zi + 1;
    for (double v : ps.state.pi) out << ',' << fmt(v);
    for (double v : ps.state.mu) out << ',' << fmt(v);
    for (double v : ps.state.lambda) out << ',' << fmt(v);
    out << "\n";
  }
  return out.str();
}

std::string dp_samples_csv(const RunConfig& config, const std::vector<DpPerfectSample>& s) {
  std::ostringstream out;
  const int M = config.dp.M;
  out << "replicate,seed,t_star,steps_to_zero,k,alpha";
  int n = s.empty() ? 0 : static_cast<int>(s.front().state.z.size());
  for (int i = 0; i < n; ++i) out << ",z" << i + 1;
  for (int j = 0; j < M; ++j) out << ",s" << j + 1;
  for (int j = 0; j < M; ++j) out << ",mu" << j + 1;
  for (int j = 0; j < M; ++j) out << ",lambda" << j + 1;
  out << "\n";
  for (std::size_t r = 0; r < s.size(); ++r) {
    const auto& ps = s[r];
    out << r << ',' << ps.seed << ',' << ps.record.t_star << ',' << ps.record.steps_to_zero << ','
        << ps.state.k << ',' << fmt(ps.state.alpha);
    for (int zi : ps.state.z) out << ',' << zi + 1;
    for (int sj : ps.state.s) out << ',' << sj + 1;
    for (int j = 0; j < M; ++j) out << ',' << fmt(ps.state.theta_mu(j));
    for (int j = 0; j < M; ++j) out << ',' << fmt(ps.state.theta_lambda(j));
    out << "\n";
  }
  return out.str();
}

void write_run_outputs(const RunConfig& config, const RunOutputs& outputs, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::string samples = config.model == ModelKind::Dp
                            ? dp_samples_csv(config, outputs.dp_samples)
                            : finite_samples_csv(config, outputs.finite_samples);
  write_file(dir + "/samples.csv", samples);
  write_file(dir + "/coalescence.csv", coalescence_csv(outputs));
  write_file(dir + "/config.replay", serialize_config(config));
}

void write_density_table(const std::string& path, const GridDensity& density) {
  std::ostringstream out;
  out << "# bandwidth = " << fmt(density.bandwidth) << "\n";
  out << "x,density\n";
  for (std::size_t g = 0; g < density.x.size(); ++g)
    out << fmt(density.x[g]) << ',' << fmt(density.density[g]) << "\n";
  write_file(path, out.str());
}

void write_predictive_table(const std::string& path, const std::vector<double>& x,
                            const std::vector<double>& density) {
  std::ostringstream out;
  out << "x,density\n";
  for (std::size_t g = 0; g < x.size(); ++g) out << fmt(x[g]) << ',' << fmt(density[g]) << "\n";
  write_file(path, out.str());
}

void write_kdist_table(const std::string& path, const std::vector<double>& k_probs) {
  std::ostringstream out;
  out << "k,probability\n";
  for (std::size_t k = 0; k < k_probs.size(); ++k) out << k + 1 << ',' << fmt(k_probs[k]) << "\n";
  write_file(path, out.str());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

RunOutputs read_samples_csv(const RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("samples: cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) throw usage_error("samples: empty file");
  std::vector<std::string> cols = split_csv(header);
  int n = 0;
  for (const std::string& c : cols)
    if (c.size() > 1 && c[0] == 'z') n = std::max(n, std::stoi(c.substr(1)));

  RunOutputs out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    std::size_t at = 0;
    auto next = [&]() { return f.at(at++); };
    if (config.model == ModelKind::Dp) {
      const int M = config.dp.M;
      DpPerfectSample ps;
      next();  // replicate
      ps.seed = std::stoull(next());
      ps.record.t_star = std::stoll(next());
      ps.record.steps_to_zero = std::stoll(next());
      int k = std::stoi(next());
      ps.state.alpha = std::stod(next());
      ps.state.z.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) ps.state.z[static_cast<std::size_t>(i)] = std::stoi(next()) - 1;
      ps.state.s.resize(static_cast<std::size_t>(M));
      for (int j = 0; j < M; ++j) ps.state.s[static_cast<std::size_t>(j)] = std::stoi(next()) - 1;
      ps.state.k = k;
      std::vector<double> mu_m(static_cast<std::size_t>(M)), lam_m(static_cast<std::size_t>(M));
      for (int j = 0; j < M; ++j) mu_m[static_cast<std::size_t>(j)] = std::stod(next());
      for (int j = 0; j < M; ++j) lam_m[static_cast<std::size_t>(j)] = std::stod(next());
      ps.state.mu_star.assign(static_cast<std::size_t>(k), 0.0);
      ps.state.lambda_star.assign(static_cast<std::size_t>(k), 0.0);
      for (int j = 0; j < M; ++j) {
        int l = ps.state.s[static_cast<std::size_t>(j)];
        ps.state.mu_star[static_cast<std::size_t>(l)] = mu_m[static_cast<std::size_t>(j)];
        ps.state.lambda_star[static_cast<std::size_t>(l)] = lam_m[static_cast<std::size_t>(j)];
      }
      ps.state.c_ops.assign(static_cast<std::size_t>(M), 0);
      out.dp_samples.push_back(std::move(ps));
    } else {
      const int p = config.finite.p;
      FinitePerfectSample ps;
      next();
      ps.seed = std::stoull(next());
      ps.record.t_star = std::stoll(next());
      ps.record.steps_to_zero = std::stoll(next());
      ps.state.z.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) ps.state.z[static_cast<std::size_t>(i)] = std::stoi(next()) - 1;
      ps.state.pi.resize(static_cast<std::size_t>(p));
      ps.state.mu.resize(static_cast<std::size_t>(p));
      ps.state.lambda.resize(static_cast<std::size_t>(p));
      for (int j = 0; j < p; ++j) ps.state.pi[static_cast<std::size_t>(j)] = std::stod(next());
      for (int j = 0; j < p; ++j) ps.state.mu[static_cast<std::size_t>(j)] = std::stod(next());
      for (int j = 0; j < p; ++j) ps.state.lambda[static_cast<std::size_t>(j)] = std::stod(next());
      out.finite_samples.push_back(std::move(ps));
    }
  }
  return out;
}

}  // namespace cftpmix
