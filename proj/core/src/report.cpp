#include "rocsurf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace rocsurf {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json json_number(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

namespace {

void write_value(std::ostream& out, const json& j, int depth) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close_pad(2 * depth, ' ');
  if (j.is_number_float()) {
    out << format_double(j.get<double>());
  } else if (j.is_object()) {
    if (j.empty()) {
      out << "{}";
      return;
    }
    out << "{\n";
    bool first = true;
    for (const auto& [key, value] : j.items()) {
      if (!first) out << ",\n";
      first = false;
      out << pad << json(key).dump() << ": ";
      write_value(out, value, depth + 1);
    }
    out << '\n' << close_pad << '}';
  } else if (j.is_array()) {
    const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
    if (j.empty() || flat) {
      out << '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out << ", ";
        write_value(out, j[i], depth + 1);
      }
      out << ']';
      return;
    }
    out << "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out << ",\n";
      out << pad;
      write_value(out, j[i], depth + 1);
    }
    out << '\n' << close_pad << ']';
  } else {
    out << j.dump();
  }
}

}  // namespace

void write_json(std::ostream& out, const json& j) {
  write_value(out, j, 0);
  out << '\n';
}

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v[i]));
  return a;
}

json intervals_json(const Eigen::Vector3d& est, const Eigen::Vector3d& sd, double level) {
  json a = json::array();
  for (const auto& iv : wald_intervals(est, sd, level)) a.push_back({json_number(iv.lo), json_number(iv.hi)});
  return a;
}

}  // namespace

json to_json(const GlmFit& fit) {
  json j;
  j["family"] = to_string(fit.family);
  j["tau"] = vec_json(fit.tau);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["score_norm"] = json_number(fit.score_norm);
  return j;
}

json to_json(const CutPair& cut) { return json::array({json_number(cut.c1), json_number(cut.c2)}); }

json to_json(const BootstrapResult& boot) {
  json j;
  j["replicates"] = boot.replicates;
  j["n_failed"] = boot.n_failed;
  j["warning"] = boot.warning;
  j["sd"] = vec_json(boot.sd);
  j["percentile_2.5"] = vec_json(boot.lower);
  j["percentile_97.5"] = vec_json(boot.upper);
  return j;
}

json to_json(const TcfEstimate& est, double level) {
  json j;
  j["method"] = to_string(est.method);
  j["cut"] = to_json(est.cut);
  j["tcf"] = vec_json(est.tcf);
  if (est.method == Method::spe) j["tcf_clipped"] = vec_json(est.clipped());
  if (est.asy_sd) {
    j["asy_sd"] = vec_json(*est.asy_sd);
    j["ci_level"] = level;
    j["ci"] = intervals_json(est.tcf, *est.asy_sd, level);
  }
  if (est.cov) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back(vec_json(est.cov->row(r).transpose()));
    j["cov"] = rows;
  }
  if (est.boot_sd) j["boot_sd"] = vec_json(*est.boot_sd);
  if (est.flag) j["flag"] = *est.flag;
  return j;
}

json to_json(const VusEstimate& est, double level) {
  json j;
  j["method"] = to_string(est.method);
  j["mu"] = json_number(est.mu);
  j["theta"] = vec_json(est.theta);
  if (est.asy_var) {
    const double sd = std::sqrt(*est.asy_var);
    const double z = wald_multiplier(level);
    j["asy_sd"] = json_number(sd);
    j["ci_level"] = level;
    j["ci"] = {json_number(est.mu - z * sd), json_number(est.mu + z * sd)};
  }
  if (est.boot_sd) j["boot_sd"] = json_number(*est.boot_sd);
  return j;
}

json to_json(const Ellipse& e, double level) {
  json j;
  j["level"] = level;
  j["center"] = {json_number(e.center[0]), json_number(e.center[1])};
  j["radius2"] = json_number(e.radius2);
  j["semi_axes"] = {json_number(e.semi_axes[0]), json_number(e.semi_axes[1])};
  json poly = json::array();
  for (const auto& p : e.polygon) poly.push_back({json_number(p[0]), json_number(p[1])});
  j["polygon"] = poly;
  return j;
}

json to_json(const SimReport& report) {
  const auto& c = report.config;
  json j;
  j["study"] = to_string(c.study);
  if (c.study == Study::s1 || c.study == Study::s2) j["lambda"] = c.lambda_index;
  j["n"] = c.n;
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["boot"] = c.boot;
  j["verification_rate"] = json_number(report.verification_rate);
  auto opt3 = [](const std::optional<Eigen::Vector3d>& v) -> json { return v ? vec_json(*v) : json(nullptr); };
  auto opt1 = [](const std::optional<double>& v) -> json { return v ? json_number(*v) : json(nullptr); };
  if (is_vus_study(c.study)) {
    j["true_vus"] = json_number(*report.true_vus);
    json cells = json::array();
    for (const auto& cell : report.vus) {
      cells.push_back({{"method", to_string(cell.method)},
                       {"mean", json_number(cell.mean)},
                       {"mc_sd", json_number(cell.mc_sd)},
                       {"asy_sd", opt1(cell.asy_sd)},
                       {"boot_sd", opt1(cell.boot_sd)},
                       {"n_ok", cell.n_ok}});
    }
    j["vus"] = cells;
  } else {
    json cuts = json::array();
    for (std::size_t ci = 0; ci < report.cuts.size(); ++ci) {
      json cj;
      cj["cut"] = to_json(report.cuts[ci]);
      cj["true"] = vec_json(report.truth[ci]);
      json cells = json::array();
      for (const auto& cell : report.tcf) {
        if (!(cell.cut == report.cuts[ci])) continue;
        cells.push_back({{"method", to_string(cell.method)},
                         {"tcf", vec_json(cell.mean)},
                         {"mc_sd", vec_json(cell.mc_sd)},
                         {"asy_sd", opt3(cell.asy_sd)},
                         {"boot_sd", opt3(cell.boot_sd)},
                         {"n_ok", cell.n_ok}});
      }
      cj["methods"] = cells;
      cuts.push_back(cj);
    }
    j["cuts"] = cuts;
  }
  json failures = json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"replicate", f.replicate}, {"method", to_string(f.method)}, {"stage", f.stage}, {"what", f.what}});
  }
  j["failures"] = failures;
  return j;
}

void write_surface_csv(std::ostream& out, std::span<const TcfEstimate> points, bool with_sd) {
  out << "c1,c2,tcf1,tcf2,tcf3" << (with_sd ? ",sd1,sd2,sd3" : "") << ",flag\n";
  for (const auto& p : points) {
    out << format_double(p.cut.c1) << ',' << format_double(p.cut.c2);
    for (int k = 0; k < 3; ++k) out << ',' << format_double(p.tcf[k]);
    if (with_sd) {
      for (int k = 0; k < 3; ++k) out << ',' << (p.asy_sd ? format_double((*p.asy_sd)[k]) : std::string());
    }
    out << ',' << (p.flag ? "\"" + *p.flag + "\"" : std::string()) << '\n';
  }
}

json surface_json(Method m, std::span<const TcfEstimate> points) {
  json j;
  j["method"] = to_string(m);
  json pts = json::array();
  for (const auto& p : points) {
    json pj;
    pj["cut"] = to_json(p.cut);
    pj["tcf"] = vec_json(p.tcf);
    if (p.asy_sd) pj["asy_sd"] = vec_json(*p.asy_sd);
    if (p.flag) pj["flag"] = *p.flag;
    pts.push_back(pj);
  }
  j["points"] = pts;
  return j;
}

namespace {

std::pair<std::string, std::string> axis_names(ClassPair pair) {
  switch (pair) {
    case ClassPair::p12: return {"tcf1", "tcf2"};
    case ClassPair::p23: return {"tcf2", "tcf3"};
    case ClassPair::p13: return {"tcf1", "tcf3"};
  }
  return {"x", "y"};
}

}  // namespace

void write_projection_csv(std::ostream& out, ClassPair pair, std::span<const ProjectionPoint> points) {
  const auto [x, y] = axis_names(pair);
  out << "cut," << x << ',' << y << '\n';
  for (const auto& p : points) out << format_double(p.cut) << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
}

json projection_json(Method m, ClassPair pair, std::span<const ProjectionPoint> points) {
  const auto [x, y] = axis_names(pair);
  json j;
  j["method"] = to_string(m);
  j["pair"] = to_string(pair);
  json pts = json::array();
  for (const auto& p : points) pts.push_back({{"cut", json_number(p.cut)}, {x, json_number(p.x)}, {y, json_number(p.y)}});
  j["points"] = pts;
  return j;
}

}  // namespace rocsurf
