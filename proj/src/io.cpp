#include "orlicz/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "orlicz/nfunc.hpp"

namespace orlicz::io {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

json to_json(const Domain& d) {
  json axes = json::array();
  for (const auto& a : d.axes()) {
    axes.push_back({{"name", a.name},
                    {"lo", a.lo},
                    {"hi", a.hi},
                    {"lo_open", a.lo_open},
                    {"hi_open", a.hi_open}});
  }
  return {{"kind", d.kind() == DomainKind::Interval1D ? "interval" : "space_time"},
          {"axes", axes}};
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw DomainError("unknown field '" + key + "' in " + where);
    }
  }
}

Axis axis_from_json(const json& j) {
  reject_unknown(j, {"name", "lo", "hi", "lo_open", "hi_open"}, "axis");
  Axis a;
  a.name = j.at("name").get<std::string>();
  a.lo = j.at("lo").get<double>();
  a.hi = j.at("hi").get<double>();
  a.lo_open = j.value("lo_open", true);
  a.hi_open = j.value("hi_open", true);
  return a;
}

}  // namespace

Domain domain_from_json(const json& j) {
  reject_unknown(j, {"kind", "axes"}, "domain");
  const auto kind = j.at("kind").get<std::string>();
  std::vector<Axis> axes;
  for (const auto& a : j.at("axes")) axes.push_back(axis_from_json(a));
  if (kind == "interval") {
    if (axes.size() != 1) throw DomainError("interval domain needs one axis");
    Domain d = Domain::interval(axes[0].lo, axes[0].hi, axes[0].lo_open, axes[0].hi_open);
    return d;
  }
  if (kind == "space_time") {
    if (axes.size() < 2) throw DomainError("space_time domain needs 2 or 3 axes");
    Axis t = axes.front();
    axes.erase(axes.begin());
    return Domain::space_time(std::move(t), std::move(axes));
  }
  throw DomainError("unknown domain kind '" + kind + "'");
}

json to_json(const QuadratureSpec& q) {
  json sing = json::array();
  for (const auto& s : q.singular) sing.push_back({{"axis", s.axis}, {"at", s.location}});
  json brk = json::array();
  for (const auto& b : q.breakpoints) brk.push_back({{"axis", b.axis}, {"at", b.location}});
  return {{"rule", "midpoint"},
          {"cells", q.cells},
          {"singular", sing},
          {"breakpoints", brk},
          {"grading_depth", q.grading_depth},
          {"divergence_ratio", q.divergence_ratio}};
}

QuadratureSpec quadrature_from_json(const json& j) {
  reject_unknown(j, {"rule", "cells", "singular", "breakpoints", "grading_depth",
                     "divergence_ratio"},
                 "quadrature");
  if (j.contains("rule") && j.at("rule") != "midpoint") {
    throw DomainError("only the midpoint rule is available");
  }
  QuadratureSpec q;
  if (j.contains("cells")) {
    const auto& c = j.at("cells");
    q.cells = c.is_array() ? c.get<std::vector<int>>() : std::vector<int>{c.get<int>()};
  }
  auto points = [](const json& arr, const char* what) {
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& p : arr) {
      reject_unknown(p, {"axis", "at"}, what);
      out.emplace_back(p.value("axis", std::size_t{0}), p.at("at").get<double>());
    }
    return out;
  };
  if (j.contains("singular")) {
    for (auto [a, x] : points(j.at("singular"), "singular point")) q.singular.push_back({a, x});
  }
  if (j.contains("breakpoints")) {
    for (auto [a, x] : points(j.at("breakpoints"), "breakpoint")) q.breakpoints.push_back({a, x});
  }
  q.grading_depth = j.value("grading_depth", q.grading_depth);
  q.divergence_ratio = j.value("divergence_ratio", q.divergence_ratio);
  return q;
}

json field_descriptor(const Field& f) {
  return {{"domain", to_json(f.domain())},
          {"resolution", f.grid().cells},
          {"arity", {f.arity().rows, f.arity().cols}}};
}

void write_field_csv(const Field& f, std::ostream& out) {
  const auto& d = f.domain();
  const auto& grid = f.grid();
  const auto& values = f.samples();
  const std::size_t dim = d.dim();
  const std::size_t comps = f.arity().size();
  for (std::size_t a = 0; a < dim; ++a) out << (a ? "," : "") << d.axis(a).name;
  for (std::size_t k = 0; k < comps; ++k) {
    out << ',';
    if (comps == 1) {
      out << "value";
    } else {
      out << "v" << k / static_cast<std::size_t>(f.arity().cols) << "_"
          << k % static_cast<std::size_t>(f.arity().cols);
    }
  }
  out << '\n';
  const std::size_t count = grid.count();
  for (std::size_t flat = 0; flat < count; ++flat) {
    std::size_t rest = flat;
    std::vector<double> p(dim);
    for (std::size_t a = dim; a-- > 0;) {
      const auto n = static_cast<std::size_t>(grid.cells[a]);
      p[a] = grid.center(d, a, static_cast<int>(rest % n));
      rest /= n;
    }
    for (std::size_t a = 0; a < dim; ++a) out << (a ? "," : "") << format_double(p[a]);
    for (std::size_t k = 0; k < comps; ++k) out << ',' << format_double(values[flat * comps + k]);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && (item.back() == '\r' || item.back() == ' ')) item.pop_back();
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    out.push_back(item);
  }
  return out;
}

double to_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DomainError("line " + std::to_string(line) + ": invalid number '" + s + "'");
  }
  return v;
}

}  // namespace

Field read_field_csv(std::istream& in, const std::optional<json>& descriptor,
                     std::string name) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("empty CSV input");
  const auto header = split(line);
  std::size_t axes = 0;
  if (descriptor) {
    axes = descriptor->at("domain").at("axes").size();
  } else {
    while (axes < header.size() &&
           (header[axes] == "t" || header[axes] == "x" || header[axes] == "y")) {
      ++axes;
    }
  }
  if (axes == 0 || axes > 3 || axes >= header.size()) {
    throw DomainError("CSV header needs axis columns followed by value columns");
  }
  const std::size_t comps = header.size() - axes;
  std::vector<std::vector<double>> coords;
  std::vector<double> raw;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw DomainError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " columns");
    }
    std::vector<double> p(axes);
    for (std::size_t a = 0; a < axes; ++a) p[a] = to_number(cells[a], line_no);
    coords.push_back(std::move(p));
    for (std::size_t k = 0; k < comps; ++k) raw.push_back(to_number(cells[axes + k], line_no));
  }
  if (coords.empty()) throw DomainError("CSV has no data rows");

  std::vector<std::vector<double>> distinct(axes);
  for (std::size_t a = 0; a < axes; ++a) {
    for (const auto& p : coords) distinct[a].push_back(p[a]);
    auto& v = distinct[a];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  GridShape grid;
  for (const auto& v : distinct) grid.cells.push_back(static_cast<int>(v.size()));
  if (grid.count() != coords.size()) {
    throw DomainError("CSV rows do not form a full tensor grid");
  }

  Domain domain;
  Arity arity{static_cast<int>(comps), 1};
  if (descriptor) {
    reject_unknown(*descriptor, {"domain", "resolution", "arity"}, "field descriptor");
    domain = domain_from_json(descriptor->at("domain"));
    if (descriptor->contains("resolution") &&
        descriptor->at("resolution").get<std::vector<int>>() != grid.cells) {
      throw DomainError("CSV grid does not match the descriptor resolution");
    }
    if (descriptor->contains("arity")) {
      const auto a = descriptor->at("arity").get<std::vector<int>>();
      if (a.size() != 2) throw DomainError("arity must be [rows, cols]");
      arity = Arity{a[0], a[1]};
      if (arity.size() != comps) throw DomainError("arity does not match value columns");
    }
  } else {
    std::vector<Axis> ax;
    for (std::size_t a = 0; a < axes; ++a) {
      const auto& v = distinct[a];
      if (v.size() < 2) {
        throw ResolutionError("axis '" + header[a] +
                              "' needs at least 2 distinct coordinates to infer the grid");
      }
      const double h = (v.back() - v.front()) / static_cast<double>(v.size() - 1);
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs((v[i] - v[i - 1]) - h) > 1e-9 * std::max(1.0, std::abs(h))) {
          throw ResolutionError("axis '" + header[a] + "' is not uniformly spaced");
        }
      }
      ax.push_back(Axis{header[a], v.front() - 0.5 * h, v.back() + 0.5 * h});
    }
    if (axes == 1) {
      domain = Domain::interval(ax[0].lo, ax[0].hi);
    } else {
      Axis t = ax.front();
      ax.erase(ax.begin());
      domain = Domain::space_time(std::move(t), std::move(ax));
    }
  }
  if (domain.dim() != axes) throw DomainError("descriptor domain rank mismatch");

  // Reorder rows into row-major cell order.
  std::vector<double> values(raw.size());
  for (std::size_t r = 0; r < coords.size(); ++r) {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < axes; ++a) {
      const auto& v = distinct[a];
      const auto i = static_cast<std::size_t>(
          std::lower_bound(v.begin(), v.end(), coords[r][a]) - v.begin());
      flat = flat * v.size() + i;
    }
    std::copy_n(&raw[r * comps], comps, &values[flat * comps]);
  }
  return Field::sampled(std::move(domain), std::move(grid), arity, std::move(values),
                        std::move(name));
}

}  // namespace orlicz::io
