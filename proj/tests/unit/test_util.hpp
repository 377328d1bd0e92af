#pragma once

#include <random>
#include <string>

#include "rtsc/case_io.hpp"
#include "rtsc/grid.hpp"

namespace rtsc::testing {

inline std::string data_path(const std::string& name) { return std::string(RTSC_DATA_DIR) + "/" + name; }

inline NetworkCase case9() { return load_case(data_path("case9_wind.case")); }
inline NetworkCase smib() { return load_case(data_path("smib.case")); }

/// Two buses, one line y = 1 - 2j, no shunt, generators on both ends.
inline NetworkCase two_bus(double pd2 = 50.0) {
  NetworkCase c;
  c.name = "two_bus";
  Bus b1;
  b1.id = 1;
  b1.type = BusType::Ref;
  Bus b2;
  b2.id = 2;
  b2.pd = pd2;
  c.buses = {b1, b2};
  Line l;
  l.id = 1;
  l.from_bus = 1;
  l.to_bus = 2;
  l.r = 0.2;
  l.x = 0.4;  // 1/(0.2+0.4j) = 1 - 2j
  c.lines = {l};
  Generator g;
  g.id = 1;
  g.bus = 1;
  g.pmax = 200;
  g.qmin = -200;
  g.qmax = 200;
  g.c1 = 10;
  g.h = 5;
  g.xd_p = 0.3;
  c.generators = {g};
  return c;
}

/// Random connected case with `n` buses and a generator on every bus.
inline NetworkCase random_case(std::mt19937_64& rng, std::size_t n, bool with_pfr) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NetworkCase c;
  c.name = "random";
  for (std::size_t i = 0; i < n; ++i) {
    Bus b;
    b.id = static_cast<int>(i + 1);
    b.type = i == 0 ? BusType::Ref : BusType::PV;
    b.pd = 20.0 + 60.0 * u(rng);
    b.qd = 5.0 + 20.0 * u(rng);
    b.vmin = 0.94;
    b.vmax = 1.06;
    c.buses.push_back(b);
  }
  int lid = 1;
  auto add_line = [&](std::size_t a, std::size_t b) {
    Line l;
    l.id = lid++;
    l.from_bus = static_cast<int>(a + 1);
    l.to_bus = static_cast<int>(b + 1);
    l.r = 0.01 + 0.03 * u(rng);
    l.x = 0.08 + 0.2 * u(rng);
    l.b = 0.05 * u(rng);
    c.lines.push_back(l);
  };
  for (std::size_t i = 1; i < n; ++i) add_line(static_cast<std::size_t>(u(rng) * static_cast<double>(i)), i);
  if (n >= 3) add_line(0, n - 1);
  if (with_pfr) {
    auto& l = c.lines[static_cast<std::size_t>(u(rng) * static_cast<double>(c.lines.size()))];
    l.has_pfr = true;
    l.pfr = {0.95, 1.05, deg2rad(-10), deg2rad(10)};
  }
  for (std::size_t i = 0; i < n; ++i) {
    Generator g;
    g.id = static_cast<int>(i + 1);
    g.bus = static_cast<int>(i + 1);
    g.pmin = 0.0;
    g.pmax = 150.0 + 100.0 * u(rng);
    g.qmin = -150.0;
    g.qmax = 150.0;
    g.c2 = 0.01 + 0.1 * u(rng);
    g.c1 = 5.0 + 20.0 * u(rng);
    g.c0 = 100.0 * u(rng);
    g.h = 3.0 + 5.0 * u(rng);
    g.xd_p = 0.1 + 0.2 * u(rng);
    c.generators.push_back(g);
  }
  return c;
}

}  // namespace rtsc::testing
