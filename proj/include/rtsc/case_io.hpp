#pragma once

// Plain-text case files.
//
//   rtsc-case 1
//   name <string>
//   base_mva <MVA>
//   frequency <Hz>
//   [bus]     id type Pd Qd Gs Bs Vmin Vmax Vm Va_deg
//   [branch]  id from to r x b [rate_a]
//   [gen]     id bus Pg Qg Vg Pmin Pmax Qmin Qmax H D xd_p [xq_p xd xq Td0_p Tq0_p]
//   [gencost] gen_id c2 c1 c0
//   [wind]    id bus Pw alpha_day_ahead alpha_short_term
//   [pfr]     branch_id gamma_min gamma_max beta_min_deg beta_max_deg
//
// Bus type is 1 (PQ), 2 (PV) or 3 (reference). Powers are in MW/MVAr, all
// impedances in p.u. on base_mva. '#' starts a comment.

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "rtsc/grid.hpp"

namespace rtsc {

class CaseFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& line, int lineno) {
  std::istringstream in(line);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw CaseFormatError("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
    }
  }
  return out;
}

inline void need_columns(const std::vector<double>& v, std::size_t n, const std::string& table,
                         int lineno) {
  if (v.size() < n)
    throw CaseFormatError("line " + std::to_string(lineno) + ": table [" + table + "] needs " +
                          std::to_string(n) + " columns, got " + std::to_string(v.size()));
}

}  // namespace detail

inline NetworkCase parse_case(std::istream& in) {
  NetworkCase c;
  std::string raw;
  std::string table;
  int lineno = 0;
  bool header = false;
  struct PfrRow {
    int line;
    PfrLimits lim;
  };
  std::vector<PfrRow> pfr_rows;
  struct CostRow {
    int gen;
    double c2, c1, c0;
  };
  std::vector<CostRow> cost_rows;

  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream probe(raw);
    std::string first;
    if (!(probe >> first)) continue;

    if (!header) {
      int version = 0;
      if (first != "rtsc-case" || !(probe >> version))
        throw CaseFormatError("missing 'rtsc-case <version>' header");
      if (version != 1) throw CaseFormatError("unsupported case version " + std::to_string(version));
      header = true;
      continue;
    }
    if (first.front() == '[') {
      if (first.back() != ']') throw CaseFormatError("line " + std::to_string(lineno) + ": bad table tag");
      table = first.substr(1, first.size() - 2);
      if (table != "bus" && table != "branch" && table != "gen" && table != "gencost" &&
          table != "wind" && table != "pfr")
        throw CaseFormatError("unknown table [" + table + "]");
      continue;
    }
    if (table.empty()) {
      std::string value;
      std::getline(probe >> std::ws, value);
      if (first == "name") {
        c.name = value;
      } else if (first == "base_mva") {
        c.base_mva = std::stod(value);
      } else if (first == "frequency") {
        c.frequency = std::stod(value);
      } else {
        throw CaseFormatError("line " + std::to_string(lineno) + ": unknown key '" + first + "'");
      }
      continue;
    }

    const auto v = detail::parse_numbers(raw, lineno);
    if (table == "bus") {
      detail::need_columns(v, 10, table, lineno);
      Bus b;
      b.id = static_cast<int>(v[0]);
      const int type = static_cast<int>(v[1]);
      if (type < 1 || type > 3) throw CaseFormatError("line " + std::to_string(lineno) + ": bad bus type");
      b.type = static_cast<BusType>(type);
      b.pd = v[2];
      b.qd = v[3];
      b.gs = v[4];
      b.bs = v[5];
      b.vmin = v[6];
      b.vmax = v[7];
      b.vm = v[8];
      b.va = v[9];
      c.buses.push_back(b);
    } else if (table == "branch") {
      detail::need_columns(v, 6, table, lineno);
      Line l;
      l.id = static_cast<int>(v[0]);
      l.from_bus = static_cast<int>(v[1]);
      l.to_bus = static_cast<int>(v[2]);
      l.r = v[3];
      l.x = v[4];
      l.b = v[5];
      if (v.size() > 6) l.rate_a = v[6];
      c.lines.push_back(l);
    } else if (table == "gen") {
      detail::need_columns(v, 12, table, lineno);
      Generator g;
      g.id = static_cast<int>(v[0]);
      g.bus = static_cast<int>(v[1]);
      g.pg = v[2];
      g.qg = v[3];
      g.vg = v[4];
      g.pmin = v[5];
      g.pmax = v[6];
      g.qmin = v[7];
      g.qmax = v[8];
      g.h = v[9];
      g.d = v[10];
      g.xd_p = v[11];
      if (v.size() >= 17) {
        g.xq_p = v[12];
        g.xd = v[13];
        g.xq = v[14];
        g.td0_p = v[15];
        g.tq0_p = v[16];
      }
      c.generators.push_back(g);
    } else if (table == "gencost") {
      detail::need_columns(v, 4, table, lineno);
      cost_rows.push_back({static_cast<int>(v[0]), v[1], v[2], v[3]});
    } else if (table == "wind") {
      detail::need_columns(v, 5, table, lineno);
      WindFarm w;
      w.id = static_cast<int>(v[0]);
      w.bus = static_cast<int>(v[1]);
      w.pw = v[2];
      w.day_ahead_alpha = v[3];
      w.short_term_alpha = v[4];
      c.wind_farms.push_back(w);
    } else if (table == "pfr") {
      detail::need_columns(v, 5, table, lineno);
      pfr_rows.push_back({static_cast<int>(v[0]), {v[1], v[2], deg2rad(v[3]), deg2rad(v[4])}});
    }
  }
  if (!header) throw CaseFormatError("empty case file");

  for (const auto& row : cost_rows) {
    bool found = false;
    for (auto& g : c.generators) {
      if (g.id == row.gen) {
        g.c2 = row.c2;
        g.c1 = row.c1;
        g.c0 = row.c0;
        found = true;
      }
    }
    if (!found) throw CaseFormatError("gencost references unknown generator " + std::to_string(row.gen));
  }
  for (const auto& row : pfr_rows) {
    bool found = false;
    for (auto& l : c.lines) {
      if (l.id == row.line) {
        l.has_pfr = true;
        l.pfr = row.lim;
        found = true;
      }
    }
    if (!found) throw CaseFormatError("pfr references unknown branch " + std::to_string(row.line));
  }
  return c;
}

inline NetworkCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseFormatError("cannot open case file " + path);
  auto c = parse_case(in);
  if (c.name.empty()) c.name = path;
  return c;
}

inline void write_case(std::ostream& out, const NetworkCase& c) {
  out << std::setprecision(17);
  out << "rtsc-case 1\n";
  if (!c.name.empty()) out << "name " << c.name << "\n";
  out << "base_mva " << c.base_mva << "\nfrequency " << c.frequency << "\n";
  out << "[bus]\n# id type Pd Qd Gs Bs Vmin Vmax Vm Va\n";
  for (const auto& b : c.buses)
    out << b.id << ' ' << static_cast<int>(b.type) << ' ' << b.pd << ' ' << b.qd << ' ' << b.gs
        << ' ' << b.bs << ' ' << b.vmin << ' ' << b.vmax << ' ' << b.vm << ' ' << b.va << "\n";
  out << "[branch]\n# id from to r x b rate_a\n";
  for (const auto& l : c.lines)
    out << l.id << ' ' << l.from_bus << ' ' << l.to_bus << ' ' << l.r << ' ' << l.x << ' ' << l.b
        << ' ' << l.rate_a << "\n";
  out << "[gen]\n# id bus Pg Qg Vg Pmin Pmax Qmin Qmax H D xd_p xq_p xd xq Td0_p Tq0_p\n";
  for (const auto& g : c.generators)
    out << g.id << ' ' << g.bus << ' ' << g.pg << ' ' << g.qg << ' ' << g.vg << ' ' << g.pmin << ' '
        << g.pmax << ' ' << g.qmin << ' ' << g.qmax << ' ' << g.h << ' ' << g.d << ' ' << g.xd_p
        << ' ' << g.xq_p << ' ' << g.xd << ' ' << g.xq << ' ' << g.td0_p << ' ' << g.tq0_p << "\n";
  out << "[gencost]\n# gen c2 c1 c0\n";
  for (const auto& g : c.generators)
    out << g.id << ' ' << g.c2 << ' ' << g.c1 << ' ' << g.c0 << "\n";
  if (!c.wind_farms.empty()) {
    out << "[wind]\n# id bus Pw alpha_da alpha_st\n";
    for (const auto& w : c.wind_farms)
      out << w.id << ' ' << w.bus << ' ' << w.pw << ' ' << w.day_ahead_alpha << ' '
          << w.short_term_alpha << "\n";
  }
  bool any_pfr = false;
  for (const auto& l : c.lines) any_pfr = any_pfr || l.has_pfr;
  if (any_pfr) {
    out << "[pfr]\n# branch gamma_min gamma_max beta_min_deg beta_max_deg\n";
    for (const auto& l : c.lines)
      if (l.has_pfr)
        out << l.id << ' ' << l.pfr.gamma_min << ' ' << l.pfr.gamma_max << ' '
            << rad2deg(l.pfr.beta_min) << ' ' << rad2deg(l.pfr.beta_max) << "\n";
  }
}

}  // namespace rtsc
