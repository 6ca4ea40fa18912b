// Flat key=value problem files for the `design` subcommands.
//
//   alpha = 0.9
//   pi0 = 0.2 0.8
//   theta_bar = 1 2
//   sigma_bar = 0.1 0      (one line per row)
//   feature = 1 0          (one line per action column)
//   lower = 0.1 0.2        (tabular box)
//
// Numbers are separated by spaces or commas; '#' starts a comment.
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "safelog/linear_design.hpp"

namespace safelog {

class Config {
 public:
  /// Throws ValidationError naming the line on malformed input.
  static Config parse(std::istream& in);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  /// Every line given for `key`, in file order.
  const std::vector<Vector>& lines(const std::string& key) const;
  /// The single line for `key`.
  const Vector& vector(const std::string& key) const;
  double scalar(const std::string& key) const;
  /// Stacks the lines for `key` as rows.
  Matrix rows(const std::string& key) const;

  /// Later entries replace earlier ones key by key.
  void merge(const Config& other);
  void set(const std::string& key, Vector value);

 private:
  std::map<std::string, std::vector<Vector>> entries_;
};

/// Parses "0.2,0.8" or "0.2 0.8".
Vector parse_numbers(const std::string& text);

struct TabularSetup {
  Policy pi0;
  double alpha;
  std::optional<RewardBox> box;
};

/// pi0, alpha and optionally lower/upper.
TabularSetup tabular_setup(const Config& cfg);

/// pi0, alpha, theta_bar, sigma_bar rows and feature columns.
DesignProblem linear_setup(const Config& cfg);

}  // namespace safelog
