#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "svarproj/common.hpp"
#include "svarproj/restrictions.hpp"
#include "svarproj/var_core.hpp"

namespace svarproj {

/// Shortest round-trip decimal form, so equal doubles always print the same.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// RFC 4180 field: quoted only when it holds a comma, quote or line break.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  require(!quoted, ErrorCode::InputError, where + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_int(std::string_view s, int& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// Header row of variable names, then one numeric row per period, oldest
/// first. Rows are numbered from 1 at the header in error messages.
inline TimeSeriesData read_csv(std::istream& in, const std::string& source = "<stream>") {
  TimeSeriesData data;
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = source + ": row " + std::to_string(row);
    if (row == 1) {
      for (auto& name : detail::split_csv_line(line, where)) data.names.emplace_back(detail::trim(name));
      require(!data.names.empty() && !(data.names.size() == 1 && data.names[0].empty()), ErrorCode::InputError,
              where + ": missing header");
      continue;
    }
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line, where);
    require(cells.size() == data.names.size(), ErrorCode::InputError,
            where + ": expected " + std::to_string(data.names.size()) + " cells, found " +
                std::to_string(cells.size()));
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      require(detail::parse_number(cells[c], values[c]), ErrorCode::InputError,
              where + ", column " + std::to_string(c + 1) + " ('" + data.names[c] + "'): '" + cells[c] +
                  "' is not a finite number");
    rows.push_back(std::move(values));
  }
  require(row >= 1, ErrorCode::InputError, source + ": empty file");
  data.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(data.names.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t c = 0; c < rows[t].size(); ++c)
      data.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = rows[t][c];
  return data;
}

inline TimeSeriesData read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::InputError, "cannot open data file " + path.string());
  return read_csv(in, path.string());
}

inline void write_csv(std::ostream& os, const TimeSeriesData& data) {
  for (std::size_t c = 0; c < data.names.size(); ++c) os << (c ? "," : "") << csv_field(data.names[c]);
  os << "\n";
  for (Eigen::Index t = 0; t < data.values.rows(); ++t) {
    for (Eigen::Index c = 0; c < data.values.cols(); ++c) os << (c ? "," : "") << format_double(data.values(t, c));
    os << "\n";
  }
}

// Restriction files: one record per line, whitespace-separated key=value
// fields, '#' starts a comment. Indices are one-based.
//
//   kind=sign_irf i=1 j=1 k=0 sense=>= bound=0
//   kind=linear_b j=1 sense=>= weights=1:0:2,2:0:-1
//   label j=1 name=demand

namespace detail {

inline RestrictionKind parse_kind(std::string_view s, const std::string& where) {
  for (auto kind : {RestrictionKind::SignIrf, RestrictionKind::ZeroIrf, RestrictionKind::ZeroB,
                    RestrictionKind::ZeroBinv, RestrictionKind::SignLongrun, RestrictionKind::ZeroLongrun,
                    RestrictionKind::LinearB})
    if (s == to_string(kind)) return kind;
  throw Error(ErrorCode::InputError, where + ": unknown kind '" + std::string(s) + "'");
}

inline Sense parse_sense(std::string_view s, const std::string& where) {
  if (s == ">=" || s == "geq") return Sense::Geq;
  if (s == "<=" || s == "leq") return Sense::Leq;
  if (s == "=" || s == "eq") return Sense::Eq;
  throw Error(ErrorCode::InputError, where + ": unknown sense '" + std::string(s) + "'");
}

inline std::map<std::string, std::string> parse_fields(std::istringstream& tokens, const std::string& where) {
  std::map<std::string, std::string> fields;
  std::string tok;
  while (tokens >> tok) {
    auto eq = tok.find('=');
    require(eq != std::string::npos && eq > 0, ErrorCode::InputError, where + ": expected key=value, got '" + tok + "'");
    auto key = tok.substr(0, eq);
    require(!fields.count(key), ErrorCode::InputError, where + ": duplicate field '" + key + "'");
    fields[key] = tok.substr(eq + 1);
  }
  return fields;
}

}  // namespace detail

inline RestrictionSet parse_restrictions(std::istream& in, const std::string& source = "<stream>") {
  RestrictionSet rset;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const std::string where = source + ": line " + std::to_string(lineno);
    std::istringstream tokens(line);

    auto index = [&](const std::map<std::string, std::string>& f, const std::string& key, bool needed, int fallback) {
      auto it = f.find(key);
      if (it == f.end()) {
        require(!needed, ErrorCode::InputError, where + ": missing field '" + key + "'");
        return fallback;
      }
      int v = 0;
      require(detail::parse_int(it->second, v), ErrorCode::InputError,
              where + ": field '" + key + "' is not an integer");
      return v;
    };

    std::string first;
    tokens >> first;
    if (first == "label") {
      auto f = detail::parse_fields(tokens, where);
      for (const auto& [key, _] : f)
        require(key == "j" || key == "name", ErrorCode::InputError, where + ": unknown field '" + key + "'");
      int j = index(f, "j", true, 0);
      require(j >= 1 && f.count("name"), ErrorCode::InputError, where + ": label needs j >= 1 and name");
      if (rset.shock_labels.size() < static_cast<std::size_t>(j)) rset.shock_labels.resize(j);
      rset.shock_labels[j - 1] = f["name"];
      continue;
    }

    tokens.clear();
    tokens.seekg(0);
    auto f = detail::parse_fields(tokens, where);
    for (const auto& [key, _] : f)
      require(key == "kind" || key == "i" || key == "j" || key == "k" || key == "sense" || key == "bound" ||
                  key == "cumulative" || key == "weights",
              ErrorCode::InputError, where + ": unknown field '" + key + "'");
    require(f.count("kind") > 0, ErrorCode::InputError, where + ": missing field 'kind'");
    Restriction r;
    r.kind = detail::parse_kind(f["kind"], where);
    const bool linear = r.kind == RestrictionKind::LinearB;
    r.i = index(f, "i", !linear, 1) - 1;
    r.j = index(f, "j", true, 1) - 1;
    r.k = index(f, "k", false, 0);
    r.sense = f.count("sense") ? detail::parse_sense(f["sense"], where) : (is_zero_kind(r.kind) ? Sense::Eq : Sense::Geq);
    if (f.count("bound"))
      require(detail::parse_number(f["bound"], r.bound), ErrorCode::InputError, where + ": bad bound");
    if (f.count("cumulative")) {
      const auto& v = f["cumulative"];
      require(v == "true" || v == "false", ErrorCode::InputError, where + ": cumulative must be true or false");
      r.cumulative = v == "true";
    }
    if (f.count("weights")) {
      require(linear, ErrorCode::InputError, where + ": weights only apply to linear_b");
      std::stringstream terms(f["weights"]);
      std::string term;
      while (std::getline(terms, term, ',')) {
        auto a = term.find(':'), b = term.rfind(':');
        WeightTerm w;
        int var = 0;
        require(a != std::string::npos && b != a && detail::parse_int(term.substr(0, a), var) &&
                    detail::parse_int(term.substr(a + 1, b - a - 1), w.horizon) &&
                    detail::parse_number(term.substr(b + 1), w.coefficient),
                ErrorCode::InputError, where + ": weight term '" + term + "' is not variable:horizon:coefficient");
        w.variable = var - 1;
        r.weights.push_back(w);
      }
    }
    rset.items.push_back(std::move(r));
  }
  return rset;
}

inline RestrictionSet read_restrictions_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::InputError, "cannot open restriction file " + path.string());
  return parse_restrictions(in, path.string());
}

inline void write_restrictions(std::ostream& os, const RestrictionSet& rset) {
  for (std::size_t j = 0; j < rset.shock_labels.size(); ++j)
    if (!rset.shock_labels[j].empty()) os << "label j=" << j + 1 << " name=" << rset.shock_labels[j] << "\n";
  for (const auto& r : rset.items) {
    os << "kind=" << to_string(r.kind);
    if (r.kind != RestrictionKind::LinearB) os << " i=" << r.i + 1;
    os << " j=" << r.j + 1 << " k=" << r.k << " sense=" << to_string(r.sense) << " bound=" << format_double(r.bound);
    if (r.cumulative) os << " cumulative=true";
    if (!r.weights.empty()) {
      os << " weights=";
      for (std::size_t w = 0; w < r.weights.size(); ++w)
        os << (w ? "," : "") << r.weights[w].variable + 1 << ":" << r.weights[w].horizon << ":"
           << format_double(r.weights[w].coefficient);
    }
    os << "\n";
  }
}

}  // namespace svarproj
