#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rdis/expr.hpp"
#include "rdis/rng.hpp"

namespace rdis {

// ---------------------------------------------------------------------------
// Sinusoid trees
//
// Variables sit on a complete k-ary tree of height h (root at depth 0,
// numbered breadth-first). Each variable contributes two terms, c0*x and
// c1*x^2. Every downward path visiting an even number m of vertices with
// 2 <= m <= a contributes c2 * prod sin(x_j) over its vertices. For h=11,
// k=2 this gives 4095 variables and 16372 / 24404 / 30036 terms for
// a = 4 / 8 / 12.

struct SinusoidSpec {
    int h = 3;
    int k = 2;
    int a = 2;
    double c0 = 0.6;
    double c1 = 0.1;
    double c2 = 12.0;
    double lo = -10.0;
    double hi = 10.0;
    std::size_t max_terms = 2'000'000;

    void validate() const;
};

ObjectiveFunction make_sinusoid(const SinusoidSpec& spec);

/// Parent of tree vertex v (v > 0) in breadth-first numbering.
inline int sinusoid_parent(int v, int k) { return (v - 1) / k; }

// ---------------------------------------------------------------------------
// Planar Lennard-Jones side chains
//
// A straight backbone of unit bonds runs from anchor0 in the direction of
// anchor1. Residue i owns backbone atom B_i = anchor0 + i*u and a side chain
// of m atoms; side-chain bond l points along angle base + theta_i1 + ... +
// theta_il, where base is the backbone direction turned by +90 degrees, so
// all-zero angles give straight side chains perpendicular to the backbone.
// Every atom pair at least `min_bond_separation` bonds apart interacts with
// E(r) = A / r^12 - B / r^6. Backbone-backbone pairs are constant and go to
// the offset.

enum class AtomType : int { Backbone = 0, Sidechain = 1 };

struct ChainSpec {
    int residues = 5;
    int angles_per_residue = 2;  // side-chain atoms per residue, 0..4
    std::array<double, 2> anchor0{0.0, 0.0};
    std::array<double, 2> anchor1{1.0, 0.0};
    double A[2][2] = {{1.0, 1.0}, {1.0, 1.0}};  // indexed by AtomType
    double B[2][2] = {{1.0, 1.0}, {1.0, 1.0}};
    int min_bond_separation = 3;
    double cutoff = 0.0;  // if > 0, skip pairs whose distance can never be below it

    void validate() const;
};

double lj_energy(double r, double A, double B);

ObjectiveFunction make_lj_chain(const ChainSpec& spec);

/// Index of angle l (0-based) of residue i.
inline int lj_angle_index(const ChainSpec& s, int residue, int l) { return residue * s.angles_per_residue + l; }

// ---------------------------------------------------------------------------
// Bundle adjustment
//
// Camera parameters (9 per camera): angle-axis rotation r, translation t,
// focal length f, radial distortion k1, k2. A world point X maps to
// P = R(r) X + t, p = -P.xy / P.z, and the predicted image point is
// f * (1 + k1 |p|^2 + k2 |p|^4) * p. Each observation contributes the two
// squared residuals (prediction - observation)^2.

struct Observation {
    int camera;
    int point;
    double x;
    double y;
};

struct BundleSpec {
    int cameras = 4;
    int points = 20;
    double density = 0.6;       // chance a camera observes a point (each point gets at least 2)
    double noise = 0.0;         // image-space observation noise
    double param_noise = 0.0;   // perturbation of the returned initial state
    std::uint64_t seed = 1;

    void validate() const;
};

struct BundleProblem {
    ObjectiveFunction f;
    int cameras = 0;
    int points = 0;
    std::vector<Observation> observations;
    std::vector<double> ground_truth;  // parameters the observations were generated from
    std::vector<double> initial;       // ground truth plus param_noise (or the file's values)
};

BundleProblem make_bundle(const BundleSpec& spec);

/// Builds the residual function for given observations; parameter values are
/// stored as both ground truth and initial state.
BundleProblem bundle_from_observations(int cameras, int points, std::vector<Observation> obs,
                                       std::vector<double> params);

/// Predicted image point for one camera (9 values) and one point (3 values).
std::array<double, 2> bal_project(const double* camera, const double* point);

void write_bal(const std::string& path, const BundleProblem& p, const std::vector<double>& params);
BundleProblem load_bal(const std::string& path);

inline int camera_var(int c, int j) { return 9 * c + j; }
inline int point_var(int cameras, int p, int j) { return 9 * cameras + 3 * p + j; }

// ---------------------------------------------------------------------------
// Variable blocks for block-coordinate baselines

std::vector<std::vector<int>> sinusoid_blocks(const SinusoidSpec& spec, int levels_per_block = 3);
std::vector<std::vector<int>> lj_blocks(const ChainSpec& spec);
std::vector<std::vector<int>> bundle_blocks(int cameras, int points);

// ---------------------------------------------------------------------------
// Small families used by tests and the harness

/// sum_i (x_i - centers_i)^2 over [lo, hi]^n with one term per variable.
ObjectiveFunction make_separable_quadratic(int n, double lo = -10.0, double hi = 10.0);

/// (x^2 - 1)^2 + tilt*x on [lo, hi].
ObjectiveFunction make_double_well(double tilt = 0.1, double lo = -2.0, double hi = 2.0);

}  // namespace rdis
