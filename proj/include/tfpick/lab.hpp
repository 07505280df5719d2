#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tfpick/realize.hpp"

namespace tfpick::lab {

struct Assertion {
    std::string description;
    bool ok = false;
    std::string detail;
};

struct CsvTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

struct DemoReport {
    std::string name;
    std::string params;
    std::vector<Assertion> assertions;
    std::vector<std::pair<std::string, std::string>> facts;
    std::vector<CsvTable> tables;
    bool pass = false;

    std::string render() const;
};

// Shrinking-disk family: truncated runs cannot absorb xi(z) = z without the
// limit function, the mass diagnostic grows with the cutoff, and the
// compactified family solves in one term.
DemoReport demo_example1(const std::vector<Index>& n_max_list = {4, 16, 64});

// Two-point family with psi(x2) = 1: membership fails structurally at the
// (x2,x2) entry and admissible kernels are diagonal.
DemoReport demo_example2(uint64_t seed = 7);

// Coordinate functions on the truncated infinite polydisk: the 2x2
// contradiction at every cutoff, resolved by the explicit limit-evaluation
// member.
DemoReport demo_infinite_polydisk(const std::vector<Index>& cutoffs = {8, 32, 128});

struct AnnulusMinimalityParams {
    double q = 0.3;
    Complex b = Complex(0.5, 0.0);
    Index grid = 64;
    Index t0_index = 0;
    double hole_radius = 2.0;  // radians removed around t0
};

// Rank-two Pick matrix at theta_{t0}, feasibility over the full grid, and
// failure once a neighborhood of t0 is removed.
DemoReport demo_annulus_minimality(const AnnulusMinimalityParams& p = {});

struct CoarseningParams {
    double q = 0.3;
    Complex b = Complex(0.5, 0.0);
    Index grid = 64;
    std::vector<Index> cell_counts = {8, 16, 32};
};

// Measure-colligation coarsening: drift bounded by the partition estimate
// and monotone under refinement.
DemoReport demo_coarsening(const CoarseningParams& p = {});

std::vector<std::string> demo_names();
DemoReport run_demo(const std::string& name, uint64_t seed = 0);

}  // namespace tfpick::lab
