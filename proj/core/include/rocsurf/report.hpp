#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rocsurf/asymptotics.hpp"
#include "rocsurf/glm.hpp"
#include "rocsurf/resampling.hpp"
#include "rocsurf/simlab.hpp"
#include "rocsurf/tcf.hpp"
#include "rocsurf/vus.hpp"

namespace rocsurf {

using json = nlohmann::ordered_json;

/// 17 significant digits; "inf", "-inf" and "nan" for non-finite values.
std::string format_double(double x);

/// Finite values as numbers, infinities as the strings "inf"/"-inf", NaN as null.
json json_number(double x);

/// Pretty-prints with floats at 17 significant digits. Arrays of scalars stay
/// on one line. Ends with a newline.
void write_json(std::ostream& out, const json& j);

json to_json(const GlmFit& fit);
json to_json(const CutPair& cut);
json to_json(const BootstrapResult& boot);

/// Includes Wald intervals at `level` when asy_sd is present.
json to_json(const TcfEstimate& est, double level);
json to_json(const VusEstimate& est, double level);
json to_json(const Ellipse& e, double level);
json to_json(const SimReport& report);

/// Columns c1,c2,tcf1,tcf2,tcf3[,sd1,sd2,sd3],flag.
void write_surface_csv(std::ostream& out, std::span<const TcfEstimate> points, bool with_sd);
json surface_json(Method m, std::span<const TcfEstimate> points);

void write_projection_csv(std::ostream& out, ClassPair pair, std::span<const ProjectionPoint> points);
json projection_json(Method m, ClassPair pair, std::span<const ProjectionPoint> points);

}  // namespace rocsurf
