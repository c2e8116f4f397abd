#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "orlicz/field.hpp"

namespace orlicz::io {

using nlohmann::json;

/// Shortest round-trip decimal form.
std::string format_double(double v);

json to_json(const Domain& d);
Domain domain_from_json(const json& j);

json to_json(const QuadratureSpec& q);
QuadratureSpec quadrature_from_json(const json& j);

/// {"domain": ..., "resolution": [...], "arity": [rows, cols]}
json field_descriptor(const Field& sampled);

/// Header: axis names, then one column per value component. One row per
/// cell center, last axis fastest.
void write_field_csv(const Field& sampled, std::ostream& out);

/// Reads a field written by write_field_csv. Without a descriptor the axes
/// are the leading columns named t, x or y, the grid is inferred from the
/// distinct coordinates (which must be uniformly spaced), and the domain
/// extends half a cell beyond the outermost centers.
Field read_field_csv(std::istream& in, const std::optional<json>& descriptor = {},
                     std::string name = {});

}  // namespace orlicz::io
