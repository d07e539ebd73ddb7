#pragma once

#include <cstdint>
#include <vector>

#include "symlab/prng.hpp"

namespace symlab {
namespace ising {

// Square periodic lattice of +/-1 spins.
struct SpinLattice {
  int L = 0;
  std::vector<int> spins;  // row-major, L*L entries in {-1, +1}

  int at(int i, int j) const { return spins[static_cast<std::size_t>(i) * L + j]; }
  int& at(int i, int j) { return spins[static_cast<std::size_t>(i) * L + j]; }
  int magnetization() const {
    int m = 0;
    for (int s : spins) m += s;
    return m;
  }
  SpinLattice flipped() const {
    SpinLattice out = *this;
    for (int& s : out.spins) s = -s;
    return out;
  }
};

struct IsingParams {
  double J = 1.0;
  double h = 0.0;
};

// E = -J * sum over right+down periodic bonds (each bond once, 2 L^2 bonds)
// - h * sum of spins.
double energy(const SpinLattice& lattice, const IsingParams& params);

SpinLattice random_lattice(int L, Prng& prng);

std::vector<SpinLattice> sample_lattices(std::int64_t count, int L, Prng& prng);

struct LandscapeEntry {
  double energy;
  int magnetization;
  std::int64_t config_id;
};

// Energies of `count` random configurations, sorted descending.
std::vector<LandscapeEntry> energy_landscape(int L, std::int64_t count,
                                             const IsingParams& params, Prng& prng);

// Every configuration of an L x L lattice (test oracle; L <= 4).
std::vector<double> exhaustive_energies(int L, const IsingParams& params);

}  // namespace ising
}  // namespace symlab
