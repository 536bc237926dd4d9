#include "rocsurf/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "rocsurf/errors.hpp"

namespace rocsurf {

namespace {

void validate_subject(const Subject& s, std::size_t row, std::size_t p) {
  auto fail = [row](const std::string& what) {
    throw ValidationError("subject " + std::to_string(row) + ": " + what);
  };
  if (!std::isfinite(s.t)) fail("test result t is not finite");
  if (s.a.size() != p) fail("covariate dimension differs from the first subject");
  for (double x : s.a) {
    if (!std::isfinite(x)) fail("covariate is not finite");
  }
  if (s.v && !s.d) fail("verified subject (v=1) has no disease class d");
  if (!s.v && s.d) fail("unverified subject (v=0) carries a disease class d");
  if (s.d && (*s.d < 1 || *s.d > 3)) fail("disease class d must be 1, 2 or 3");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_real(std::string_view cell, std::size_t row, const std::string& column) {
  if (cell.empty()) throw ParseError(row, column, "empty numeric cell");
  double value = 0.0;
  const char* first = cell.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError(row, column, "malformed number '" + std::string(cell) + "'");
  }
  return value;
}

}  // namespace

Dataset::Dataset(std::vector<Subject> subjects) : subjects_(std::move(subjects)) {
  if (subjects_.empty()) throw ValidationError("dataset must contain at least one subject");
  p_ = subjects_.front().a.size();
  for (std::size_t i = 0; i < subjects_.size(); ++i) validate_subject(subjects_[i], i + 1, p_);
}

bool Dataset::fully_verified() const noexcept {
  for (const auto& s : subjects_) {
    if (!s.v) return false;
  }
  return true;
}

std::size_t Dataset::verified_count() const noexcept {
  std::size_t c = 0;
  for (const auto& s : subjects_) c += s.v ? 1 : 0;
  return c;
}

std::array<std::size_t, 3> Dataset::verified_class_counts() const noexcept {
  std::array<std::size_t, 3> counts{};
  for (const auto& s : subjects_) {
    if (s.v) ++counts[static_cast<std::size_t>(*s.d - 1)];
  }
  return counts;
}

void Dataset::require_all_classes_verified() const {
  auto counts = verified_class_counts();
  for (int k = 0; k < 3; ++k) {
    if (counts[k] == 0) {
      throw ValidationError("class " + std::to_string(k + 1) +
                            " does not appear among verified subjects");
    }
  }
}

CutPair::CutPair(double lo, double hi) : c1(lo), c2(hi) {
  if (!(lo < hi)) {
    throw ContractError("cut pair requires c1 < c2");
  }
}

std::size_t DesignSpec::width(std::size_t p) const {
  return (use_t ? 2 : 1) + (columns ? columns->size() : p);
}

Eigen::VectorXd design_row(const Subject& s, const DesignSpec& spec) {
  const std::size_t w = spec.width(s.a.size());
  Eigen::VectorXd u(static_cast<Eigen::Index>(w));
  u[0] = 1.0;
  Eigen::Index next = 1;
  if (spec.use_t) u[next++] = s.t;
  if (spec.columns) {
    for (std::size_t c : *spec.columns) {
      if (c >= s.a.size()) throw ContractError("design column out of range");
      u[next++] = s.a[c];
    }
  } else {
    for (double x : s.a) u[next++] = x;
  }
  return u;
}

Eigen::MatrixXd design_matrix(const Dataset& ds, const DesignSpec& spec) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::MatrixXd u(n, static_cast<Eigen::Index>(spec.width(ds.covariate_dim())));
  for (Eigen::Index i = 0; i < n; ++i) {
    u.row(i) = design_row(ds[static_cast<std::size_t>(i)], spec).transpose();
  }
  return u;
}

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "", "missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = split(line);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < header.size(); ++j) index.emplace(std::string(header[j]), j);

  auto column = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw ParseError(1, name, "required column missing from header");
    return it->second;
  };
  const std::size_t t_col = column(schema.t);
  const std::size_t v_col = column(schema.v);
  const std::size_t d_col = column(schema.d);

  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    for (std::size_t j = 1;; ++j) {
      const std::string name = "a" + std::to_string(j);
      if (!index.contains(name)) break;
      cov_names.push_back(name);
    }
  }
  std::vector<std::size_t> cov_cols;
  for (const auto& name : cov_names) cov_cols.push_back(column(name));

  std::vector<Subject> subjects;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError(row, "", "expected " + std::to_string(header.size()) + " cells, found " +
                                    std::to_string(cells.size()));
    }
    Subject s;
    s.t = parse_real(cells[t_col], row, schema.t);
    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      s.a.push_back(parse_real(cells[cov_cols[j]], row, cov_names[j]));
    }
    const auto v = cells[v_col];
    if (v == "1") {
      s.v = true;
    } else if (v == "0") {
      s.v = false;
    } else {
      throw ParseError(row, schema.v, "verification flag must be 0 or 1, found '" + std::string(v) + "'");
    }
    const auto d = cells[d_col];
    if (!d.empty()) {
      if (d != "1" && d != "2" && d != "3") {
        throw ValidationError("row " + std::to_string(row) + ": disease class d must be 1, 2, 3 or empty, found '" +
                              std::string(d) + "'");
      }
      s.d = d[0] - '0';
    }
    if (s.v && !s.d) {
      throw ValidationError("row " + std::to_string(row) + ": verified subject (v=1) has empty d");
    }
    if (!s.v && s.d) {
      throw ValidationError("row " + std::to_string(row) + ": unverified subject (v=0) has d set");
    }
    subjects.push_back(std::move(s));
  }
  if (subjects.empty()) throw ValidationError("CSV file contains no data rows");
  return Dataset(std::move(subjects));
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& ds) {
  out << "t";
  for (std::size_t j = 0; j < ds.covariate_dim(); ++j) out << ",a" << (j + 1);
  out << ",v,d\n";
  std::ostringstream cell;
  cell << std::setprecision(17);
  for (const auto& s : ds) {
    cell.str("");
    cell << s.t;
    for (double x : s.a) cell << ',' << x;
    cell << ',' << (s.v ? 1 : 0) << ',';
    if (s.d) cell << *s.d;
    out << cell.str() << '\n';
  }
}

double verification_rate(const Dataset& ds) {
  return static_cast<double>(ds.verified_count()) / static_cast<double>(ds.size());
}

}  // namespace rocsurf
