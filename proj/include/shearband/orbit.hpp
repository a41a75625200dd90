#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "shearband/model.hpp"

namespace shearband {

// Projection boundary data for a heteroclinic orbit on [-eta_max, eta_max]:
// the orbit starts at M0 + eps0*nu0 with nu0 a unit vector in the unstable
// subspace of M0, and ends within eps1 of M1 along its stable subspace.
struct BoundaryData {
  double eps0 = 0;
  Vec4 nu0 = Vec4::Zero();
  double eps1 = 0;
  Vec4 nu1 = Vec4::Zero();
  double eta_max = 10.0;
};

struct Orbit {
  std::vector<double> eta;
  std::vector<Vec4> states;
  Params params;
  BoundaryData boundary;

  size_t size() const { return eta.size(); }
  const Vec4& front_state() const { return states.front(); }
  const Vec4& back_state() const { return states.back(); }
};

inline void write_orbit_csv(const Orbit& orb, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw MissingArtifact("cannot open " + path + " for writing");
  os << "eta,p,q,r,s\n";
  char buf[512];
  for (size_t i = 0; i < orb.eta.size(); ++i) {
    const Vec4& x = orb.states[i];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", orb.eta[i], x[0], x[1], x[2],
                  x[3]);
    os << buf;
  }
}

inline Orbit read_orbit_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingArtifact("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("eta,p,q,r,s", 0) != 0)
    throw MissingArtifact(path + ": expected header eta,p,q,r,s");
  Orbit orb;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double e, p, q, r, s;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg,%lg", &e, &p, &q, &r, &s) != 5)
      throw MissingArtifact(path + ": malformed row '" + line + "'");
    orb.eta.push_back(e);
    orb.states.emplace_back(p, q, r, s);
  }
  if (orb.eta.size() >= 2) orb.boundary.eta_max = orb.eta.back();
  return orb;
}

}  // namespace shearband
