#include "safelog/config.hpp"

#include <fstream>
#include <sstream>

namespace safelog {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Vector parse_numbers(const std::string& text) {
  std::string s = text;
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream in(s);
  std::vector<double> xs;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ValidationError("not a number: '" + tok + "'");
    xs.push_back(x);
  }
  if (xs.empty()) throw ValidationError("expected at least one number");
  return Eigen::Map<const Vector>(xs.data(), Eigen::Index(xs.size()));
}

Config Config::parse(std::istream& in) {
  Config cfg;
  std::string raw;
  for (int no = 1; std::getline(in, raw); ++no) {
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(no) + ": ";
    if (eq == std::string::npos) throw ValidationError(where + "expected key = values");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError(where + "empty key");
    try {
      cfg.entries_[key].push_back(parse_numbers(line.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse(in);
}

const std::vector<Vector>& Config::lines(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ValidationError("config: missing key '" + key + "'");
  return it->second;
}

const Vector& Config::vector(const std::string& key) const {
  const auto& ls = lines(key);
  if (ls.size() != 1) throw ValidationError("config: key '" + key + "' given more than once");
  return ls.front();
}

double Config::scalar(const std::string& key) const {
  const Vector& v = vector(key);
  if (v.size() != 1) throw ValidationError("config: key '" + key + "' needs one number");
  return v(0);
}

Matrix Config::rows(const std::string& key) const {
  const auto& ls = lines(key);
  Matrix m(Eigen::Index(ls.size()), ls.front().size());
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (ls[i].size() != m.cols()) throw ValidationError("config: rows of '" + key + "' differ in length");
    m.row(Eigen::Index(i)) = ls[i].transpose();
  }
  return m;
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

void Config::set(const std::string& key, Vector value) { entries_[key] = {std::move(value)}; }

TabularSetup tabular_setup(const Config& cfg) {
  TabularSetup s{Policy(cfg.vector("pi0")), cfg.scalar("alpha"), std::nullopt};
  check_alpha(s.alpha);
  if (cfg.has("lower") || cfg.has("upper")) {
    const Eigen::Index k = s.pi0.size();
    const Vector lo = cfg.has("lower") ? cfg.vector("lower") : Vector::Zero(k);
    const Vector hi = cfg.has("upper") ? cfg.vector("upper") : Vector::Ones(k);
    if (lo.size() != k || hi.size() != k) throw ValidationError("config: box size != pi0 size");
    s.box = RewardBox(lo, hi);
  }
  return s;
}

DesignProblem linear_setup(const Config& cfg) {
  // feature lines are columns of A
  DesignProblem prob{FeatureMatrix(cfg.rows("feature").transpose()), Policy(cfg.vector("pi0")),
                     cfg.scalar("alpha"), Ellipsoid(cfg.vector("theta_bar"), cfg.rows("sigma_bar"))};
  prob.validate();
  return prob;
}

}  // namespace safelog
