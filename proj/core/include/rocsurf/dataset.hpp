#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rocsurf {

/// One patient: test result, covariates, verification flag and, when
/// verified, the disease class in {1, 2, 3}.
struct Subject {
  double t = 0.0;
  std::vector<double> a;
  bool v = false;
  std::optional<int> d;

  /// Indicator D_k for k in {1, 2, 3}; zero when unverified.
  double indicator(int k) const noexcept { return d && *d == k ? 1.0 : 0.0; }
};

/// Immutable, validated collection of subjects. Row order is significant:
/// every per-subject quantity downstream is aligned by index.
class Dataset {
 public:
  /// Throws ValidationError when the invariants of Subject or Dataset fail.
  explicit Dataset(std::vector<Subject> subjects);

  std::size_t size() const noexcept { return subjects_.size(); }
  std::size_t covariate_dim() const noexcept { return p_; }
  const Subject& operator[](std::size_t i) const noexcept { return subjects_[i]; }
  std::span<const Subject> subjects() const noexcept { return subjects_; }

  auto begin() const noexcept { return subjects_.begin(); }
  auto end() const noexcept { return subjects_.end(); }

  bool fully_verified() const noexcept;
  std::size_t verified_count() const noexcept;
  /// Verified subjects per class, index 0..2 for classes 1..3.
  std::array<std::size_t, 3> verified_class_counts() const noexcept;

  /// Throws ValidationError unless each class appears among the verified.
  void require_all_classes_verified() const;

 private:
  std::vector<Subject> subjects_;
  std::size_t p_ = 0;
};

/// Cut pair c1 < c2. Infinite sentinels are allowed for curve projections.
struct CutPair {
  double c1 = -std::numeric_limits<double>::infinity();
  double c2 = std::numeric_limits<double>::infinity();

  CutPair() = default;
  /// Throws ContractError unless c1 < c2 (NaN rejected).
  CutPair(double lo, double hi);

  friend bool operator==(const CutPair&, const CutPair&) = default;
};

/// Which covariates enter a working model. The design row is
/// (1, t, a_j for j in columns); nullopt selects every covariate.
/// use_t = false drops t (intercept-only and covariate-only models).
struct DesignSpec {
  std::optional<std::vector<std::size_t>> columns;
  bool use_t = true;

  std::size_t width(std::size_t p) const;
  friend bool operator==(const DesignSpec&, const DesignSpec&) = default;
};

/// Design row U_i. The first entry is exactly 1.
Eigen::VectorXd design_row(const Subject& s, const DesignSpec& spec);
/// n x width matrix stacking design rows.
Eigen::MatrixXd design_matrix(const Dataset& ds, const DesignSpec& spec);

/// Column names used when reading a CSV file.
struct CsvSchema {
  std::string t = "t";
  std::string v = "v";
  std::string d = "d";
  /// Covariate columns in order. Empty means every header matching a1, a2, ...
  std::vector<std::string> covariates;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset read_csv(std::istream& in, const CsvSchema& schema = {});
/// Writes t,a1..ap,v,d with 17 significant digits; d is empty when absent.
void write_csv(std::ostream& out, const Dataset& ds);

/// Mean of the verification flags.
double verification_rate(const Dataset& ds);

}  // namespace rocsurf
