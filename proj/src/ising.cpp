#include "symlab/ising.hpp"

#include <algorithm>
#include <stdexcept>

namespace symlab {
namespace ising {

double energy(const SpinLattice& lattice, const IsingParams& params) {
  const int L = lattice.L;
  if (L < 2) throw std::invalid_argument("ising::energy: L must be >= 2");
  long bond_sum = 0;
  long spin_sum = 0;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) {
      const int s = lattice.at(i, j);
      bond_sum += s * lattice.at(i, (j + 1) % L);
      bond_sum += s * lattice.at((i + 1) % L, j);
      spin_sum += s;
    }
  return -params.J * static_cast<double>(bond_sum) -
         params.h * static_cast<double>(spin_sum);
}

SpinLattice random_lattice(int L, Prng& prng) {
  SpinLattice lat;
  lat.L = L;
  lat.spins.resize(static_cast<std::size_t>(L) * L);
  for (int& s : lat.spins) s = prng.sign();
  return lat;
}

std::vector<SpinLattice> sample_lattices(std::int64_t count, int L, Prng& prng) {
  if (count < 1) throw std::invalid_argument("sample_lattices: count must be >= 1");
  if (L < 2) throw std::invalid_argument("sample_lattices: L must be >= 2");
  std::vector<SpinLattice> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(random_lattice(L, prng));
  return out;
}

std::vector<LandscapeEntry> energy_landscape(int L, std::int64_t count,
                                             const IsingParams& params, Prng& prng) {
  auto lattices = sample_lattices(count, L, prng);
  std::vector<LandscapeEntry> out;
  out.reserve(lattices.size());
  for (std::size_t i = 0; i < lattices.size(); ++i)
    out.push_back({energy(lattices[i], params), lattices[i].magnetization(),
                   static_cast<std::int64_t>(i)});
  std::stable_sort(out.begin(), out.end(), [](const LandscapeEntry& a,
                                              const LandscapeEntry& b) {
    return a.energy > b.energy;
  });
  return out;
}

std::vector<double> exhaustive_energies(int L, const IsingParams& params) {
  if (L < 2 || L > 4)
    throw std::invalid_argument("exhaustive_energies: L must be in [2, 4]");
  const int n = L * L;
  std::vector<double> out;
  out.reserve(1ull << n);
  SpinLattice lat;
  lat.L = L;
  lat.spins.assign(static_cast<std::size_t>(n), -1);
  for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
    for (int k = 0; k < n; ++k) lat.spins[k] = (bits >> k) & 1 ? 1 : -1;
    out.push_back(energy(lat, params));
  }
  return out;
}

}  // namespace ising
}  // namespace symlab
