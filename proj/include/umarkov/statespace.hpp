// Finite spin configuration space over a site set S = {0, ..., n_sites-1}.
//
// A configuration eta in {0,1}^S is encoded as the integer whose bit x is
// eta(x); the canonical enumeration order is plain index order 0..2^n-1.
// Every other module exchanges configurations as these indices.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "umarkov/errors.hpp"

namespace umarkov {

using Configuration = std::uint32_t;
using StateFunction = std::vector<double>;  // one value per configuration

inline bool site_on(Configuration eta, int x) { return (eta >> x) & 1u; }

class StateSpace {
 public:
  static constexpr int kMaxSites = 12;

  explicit StateSpace(int n_sites) : n_sites_(n_sites) {
    if (n_sites < 1 || n_sites > kMaxSites)
      throw SizeError("site count must lie in [1, " + std::to_string(kMaxSites) +
                      "], got " + std::to_string(n_sites));
  }

  int n_sites() const { return n_sites_; }
  std::uint32_t size() const { return std::uint32_t{1} << n_sites_; }
  bool contains(Configuration eta) const { return eta < size(); }

  std::vector<Configuration> enumerate() const {
    std::vector<Configuration> all(size());
    for (std::uint32_t k = 0; k < size(); ++k) all[k] = k;
    return all;
  }

  // eta with the spin at x negated.
  Configuration flip(Configuration eta, int x) const {
    if (x < 0 || x >= n_sites_)
      throw SiteError("site " + std::to_string(x) + " outside [0, " +
                      std::to_string(n_sites_) + ")");
    require_configuration(eta);
    return eta ^ (Configuration{1} << x);
  }

  // Coordinatewise partial order: xi <= eta iff xi(x) <= eta(x) for all x.
  bool leq(Configuration xi, Configuration eta) const {
    require_configuration(xi);
    require_configuration(eta);
    return (xi & ~eta) == 0;
  }

  // f is increasing iff xi <= eta implies f(xi) <= f(eta). Single upward
  // flips generate the covering relation of the order, so checking them is
  // equivalent to checking all comparable pairs.
  bool is_increasing(const StateFunction& f) const {
    require_function(f, "state function");
    for (Configuration eta = 0; eta < size(); ++eta)
      for (int x = 0; x < n_sites_; ++x)
        if (!site_on(eta, x) && f[eta] > f[eta | (Configuration{1} << x)]) return false;
    return true;
  }

  void require_configuration(Configuration eta) const {
    if (!contains(eta))
      throw ShapeError("configuration index " + std::to_string(eta) +
                       " outside a " + std::to_string(n_sites_) + "-site space");
  }

  void require_function(const StateFunction& f, const char* what) const {
    if (f.size() != size())
      throw ShapeError(std::string(what) + " has length " + std::to_string(f.size()) +
                       ", expected " + std::to_string(size()));
  }

 private:
  int n_sites_;
};

}  // namespace umarkov
