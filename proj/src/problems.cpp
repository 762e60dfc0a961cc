#include "rdis/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <tuple>

namespace rdis {

// ---------------------------------------------------------------------------
// Sinusoid

void SinusoidSpec::validate() const {
    if (h < 1) throw std::invalid_argument("sinusoid height must be at least 1");
    if (k < 2) throw std::invalid_argument("sinusoid branching must be at least 2");
    if (a < 2 || a % 2 != 0) throw std::invalid_argument("sinusoid arity must be even and at least 2");
    if (!(lo < hi)) throw std::invalid_argument("sinusoid domain must be nonempty");
}

namespace {

std::size_t tree_size(int h, int k) {
    std::size_t n = 0;
    std::size_t level = 1;
    for (int d = 0; d <= h; ++d) {
        n += level;
        level *= static_cast<std::size_t>(k);
    }
    return n;
}

}  // namespace

ObjectiveFunction make_sinusoid(const SinusoidSpec& spec) {
    spec.validate();
    const std::size_t n = tree_size(spec.h, spec.k);
    // Paths with an even vertex count m start at some vertex and descend
    // m-1 levels; count them up front to honour the size cap.
    std::size_t terms = 2 * n;
    {
        std::size_t level = 1;
        std::vector<std::size_t> per_depth;
        for (int d = 0; d <= spec.h; ++d) {
            per_depth.push_back(level);
            level *= spec.k;
        }
        for (int m = 2; m <= spec.a; m += 2) {
            for (int d = 0; d + m - 1 <= spec.h; ++d) {
                std::size_t paths = per_depth[d];
                for (int j = 0; j < m - 1; ++j) paths *= spec.k;
                terms += paths;
                if (terms > spec.max_terms) throw std::invalid_argument("sinusoid exceeds the configured term cap");
            }
        }
    }

    ObjectiveFunction f;
    for (std::size_t v = 0; v < n; ++v) f.add_variable("x" + std::to_string(v), Interval(spec.lo, spec.hi));
    for (std::size_t v = 0; v < n; ++v) {
        Expr lin;
        lin.set_root((Sym::constant(lin, spec.c0) * Sym::var(lin, static_cast<int>(v))).ref());
        f.add_term(std::move(lin));
        Expr quad;
        quad.set_root((Sym::constant(quad, spec.c1) * pow(Sym::var(quad, static_cast<int>(v)), 2)).ref());
        f.add_term(std::move(quad));
    }
    // Depth-first enumeration of downward paths from each start vertex.
    std::vector<int> path;
    auto emit = [&] {
        Expr e;
        Sym prod = sin(Sym::var(e, path[0]));
        for (std::size_t i = 1; i < path.size(); ++i) prod = prod * sin(Sym::var(e, path[i]));
        e.set_root((Sym::constant(e, spec.c2) * prod).ref());
        f.add_term(std::move(e));
    };
    auto descend = [&](auto&& self, int v) -> void {
        path.push_back(v);
        if (path.size() % 2 == 0) emit();
        if (static_cast<int>(path.size()) < spec.a) {
            const std::size_t first = static_cast<std::size_t>(v) * spec.k + 1;
            for (int c = 0; c < spec.k; ++c) {
                if (first + c < n) self(self, static_cast<int>(first + c));
            }
        }
        path.pop_back();
    };
    for (std::size_t v = 0; v < n; ++v) descend(descend, static_cast<int>(v));
    return f;
}

std::vector<std::vector<int>> sinusoid_blocks(const SinusoidSpec& spec, int levels_per_block) {
    if (levels_per_block < 1) throw std::invalid_argument("levels per block must be positive");
    const std::size_t n = tree_size(spec.h, spec.k);
    std::vector<int> depth(n, 0);
    std::vector<int> block_of(n, -1);
    std::vector<std::vector<int>> blocks;
    for (std::size_t v = 0; v < n; ++v) {
        if (v > 0) depth[v] = depth[sinusoid_parent(static_cast<int>(v), spec.k)] + 1;
        if (depth[v] % levels_per_block == 0) {
            block_of[v] = static_cast<int>(blocks.size());
            blocks.emplace_back();
        } else {
            block_of[v] = block_of[sinusoid_parent(static_cast<int>(v), spec.k)];
        }
        blocks[block_of[v]].push_back(static_cast<int>(v));
    }
    return blocks;
}

// ---------------------------------------------------------------------------
// Lennard-Jones chains

void ChainSpec::validate() const {
    if (residues < 1) throw std::invalid_argument("chain needs at least one residue");
    if (angles_per_residue < 0 || angles_per_residue > 4) {
        throw std::invalid_argument("angles per residue must be between 0 and 4");
    }
    if (anchor0 == anchor1) throw std::invalid_argument("backbone anchors must differ");
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            if (!(A[i][j] > 0.0 && B[i][j] > 0.0)) throw std::invalid_argument("LJ coefficients must be positive");
        }
    }
    if (min_bond_separation < 1) throw std::invalid_argument("bond separation must be at least 1");
}

double lj_energy(double r, double A, double B) {
    const double r6 = std::pow(r, 6);
    return A / (r6 * r6) - B / r6;
}

namespace {

struct Atom {
    int residue;
    int level;  // 0 = backbone atom, l >= 1 = l-th side-chain atom
};

int bond_distance(const Atom& a, const Atom& b) {
    if (a.residue == b.residue) return std::abs(a.level - b.level);
    return a.level + std::abs(a.residue - b.residue) + b.level;
}

}  // namespace

ObjectiveFunction make_lj_chain(const ChainSpec& spec) {
    spec.validate();
    const double ux0 = spec.anchor1[0] - spec.anchor0[0];
    const double uy0 = spec.anchor1[1] - spec.anchor0[1];
    const double norm = std::hypot(ux0, uy0);
    const double ux = ux0 / norm;
    const double uy = uy0 / norm;
    const double base = std::atan2(uy, ux) + std::numbers::pi / 2.0;
    const int m = spec.angles_per_residue;

    ObjectiveFunction f;
    for (int i = 0; i < spec.residues; ++i) {
        for (int l = 0; l < m; ++l) {
            f.add_variable("chi" + std::to_string(i) + "_" + std::to_string(l + 1),
                           Interval(-std::numbers::pi, std::numbers::pi));
        }
    }
    std::vector<Atom> atoms;
    for (int i = 0; i < spec.residues; ++i) {
        for (int l = 0; l <= m; ++l) atoms.push_back({i, l});
    }
    auto backbone = [&](int i) {
        return std::array<double, 2>{spec.anchor0[0] + i * ux, spec.anchor0[1] + i * uy};
    };
    auto type = [](const Atom& a) { return a.level == 0 ? 0 : 1; };

    // Position of an atom as expressions in e; cumulative angles are shared.
    auto position = [&](Expr& e, const Atom& a) {
        const auto b = backbone(a.residue);
        Sym x = Sym::constant(e, b[0]);
        Sym y = Sym::constant(e, b[1]);
        if (a.level == 0) return std::pair{x, y};
        Sym phi = Sym::constant(e, base);
        for (int l = 0; l < a.level; ++l) {
            phi = phi + Sym::var(e, lj_angle_index(spec, a.residue, l));
            x = x + cos(phi);
            y = y + sin(phi);
        }
        return std::pair{x, y};
    };

    for (std::size_t p = 0; p < atoms.size(); ++p) {
        for (std::size_t q = p + 1; q < atoms.size(); ++q) {
            const Atom& a = atoms[p];
            const Atom& b = atoms[q];
            if (bond_distance(a, b) < spec.min_bond_separation) continue;
            const double A = spec.A[type(a)][type(b)];
            const double B = spec.B[type(a)][type(b)];
            if (a.level == 0 && b.level == 0) {
                f.add_offset(lj_energy(std::abs(a.residue - b.residue), A, B));
                continue;
            }
            if (spec.cutoff > 0.0) {
                // The two atoms are at least |base distance| - (reach of both side chains) apart.
                const double sep = std::abs(a.residue - b.residue);
                if (sep - a.level - b.level >= spec.cutoff) continue;
            }
            Expr e;
            const auto [ax, ay] = position(e, a);
            const auto [bx, by] = position(e, b);
            const Sym dx = ax - bx;
            const Sym dy = ay - by;
            const Sym r2 = pow(dx, 2) + pow(dy, 2);
            e.set_root((Sym::constant(e, A) * pow(r2, -6) - Sym::constant(e, B) * pow(r2, -3)).ref());
            f.add_term(std::move(e));
        }
    }
    return f;
}

std::vector<std::vector<int>> lj_blocks(const ChainSpec& spec) {
    std::vector<std::vector<int>> blocks;
    if (spec.angles_per_residue == 0) return blocks;
    for (int i = 0; i < spec.residues; ++i) {
        std::vector<int> b;
        for (int l = 0; l < spec.angles_per_residue; ++l) b.push_back(lj_angle_index(spec, i, l));
        blocks.push_back(std::move(b));
    }
    return blocks;
}

// ---------------------------------------------------------------------------
// Bundle adjustment

void BundleSpec::validate() const {
    if (cameras < 2) throw std::invalid_argument("bundle needs at least 2 cameras");
    if (points < 1) throw std::invalid_argument("bundle needs at least 1 point");
    if (!(density >= 0.0 && density <= 1.0)) throw std::invalid_argument("density must lie in [0, 1]");
    if (!(noise >= 0.0) || !(param_noise >= 0.0)) throw std::invalid_argument("noise levels must be non-negative");
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 normalized(const Vec3& a) {
    const double n = std::sqrt(dot3(a, a));
    return {a[0] / n, a[1] / n, a[2] / n};
}

// Rotation P = X cos(t) + (w x X) sin(t)/t + w (w.X)(1 - cos(t))/t^2.
Vec3 rotate(const double* w, const double* X) {
    const double t2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    const double t = std::sqrt(t2);
    const double c = std::cos(t);
    const double s = std::sin(t);
    const Vec3 wv{w[0], w[1], w[2]};
    const Vec3 xv{X[0], X[1], X[2]};
    const Vec3 wx = cross(wv, xv);
    const double wd = dot3(wv, xv);
    Vec3 out;
    for (int i = 0; i < 3; ++i) out[i] = xv[i] * c + wx[i] * s / t + wv[i] * wd * (1.0 - c) / t2;
    return out;
}

// Angle-axis vector of a rotation matrix given by its rows.
Vec3 log_rotation(const std::array<Vec3, 3>& R) {
    const double tr = R[0][0] + R[1][1] + R[2][2];
    const double cos_t = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
    const double t = std::acos(cos_t);
    Vec3 axis{R[2][1] - R[1][2], R[0][2] - R[2][0], R[1][0] - R[0][1]};
    const double s = std::sqrt(dot3(axis, axis));
    if (s > 1e-6) {
        for (auto& a : axis) a *= t / s;
        return axis;
    }
    if (t < 1e-6) return {0.0, 0.0, 0.0};
    // Near pi: axis from the largest diagonal entry of (R + I) / 2.
    int i = 0;
    for (int j = 1; j < 3; ++j) {
        if (R[j][j] > R[i][i]) i = j;
    }
    Vec3 v{};
    v[i] = std::sqrt(std::max(0.0, (R[i][i] + 1.0) / 2.0));
    for (int j = 0; j < 3; ++j) {
        if (j != i) v[j] = (R[j][i] + R[i][j]) / (4.0 * v[i]);
    }
    v = normalized(v);
    return {v[0] * t, v[1] * t, v[2] * t};
}

// Builds one squared residual for image coordinate `axis` (0 = x, 1 = y).
Expr residual_expr(int cam, int pt, int cameras, int axis, double observed) {
    Expr e;
    auto cv = [&](int j) { return Sym::var(e, camera_var(cam, j)); };
    auto pv = [&](int j) { return Sym::var(e, point_var(cameras, pt, j)); };
    const Sym w0 = cv(0), w1 = cv(1), w2 = cv(2);
    const Sym X0 = pv(0), X1 = pv(1), X2 = pv(2);
    const Sym t2 = pow(w0, 2) + pow(w1, 2) + pow(w2, 2);
    const Sym t = sqrt(t2);
    const Sym c = cos(t);
    const Sym s_over_t = sin(t) / t;
    const Sym k = (Sym::constant(e, 1.0) - c) / t2;
    const Sym wd = w0 * X0 + w1 * X1 + w2 * X2;
    // Only components 0/1 and 2 of P are needed.
    const Sym cr0 = w1 * X2 - w2 * X1;
    const Sym cr1 = w2 * X0 - w0 * X2;
    const Sym cr2 = w0 * X1 - w1 * X0;
    const Sym P0 = X0 * c + cr0 * s_over_t + w0 * wd * k + cv(3);
    const Sym P1 = X1 * c + cr1 * s_over_t + w1 * wd * k + cv(4);
    const Sym P2 = X2 * c + cr2 * s_over_t + w2 * wd * k + cv(5);
    const Sym px = -(P0 / P2);
    const Sym py = -(P1 / P2);
    const Sym rho2 = pow(px, 2) + pow(py, 2);
    const Sym dist = Sym::constant(e, 1.0) + cv(7) * rho2 + cv(8) * pow(rho2, 2);
    const Sym pred = cv(6) * dist * (axis == 0 ? px : py);
    e.set_root(pow(pred - Sym::constant(e, observed), 2).ref());
    return e;
}

}  // namespace

std::array<double, 2> bal_project(const double* camera, const double* point) {
    Vec3 P = rotate(camera, point);
    for (int i = 0; i < 3; ++i) P[i] += camera[3 + i];
    const double px = -P[0] / P[2];
    const double py = -P[1] / P[2];
    const double rho2 = px * px + py * py;
    const double d = 1.0 + camera[7] * rho2 + camera[8] * rho2 * rho2;
    return {camera[6] * d * px, camera[6] * d * py};
}

BundleProblem bundle_from_observations(int cameras, int points, std::vector<Observation> obs,
                                       std::vector<double> params) {
    if (params.size() != static_cast<std::size_t>(9 * cameras + 3 * points)) {
        throw std::invalid_argument("bundle parameter vector has the wrong length");
    }
    BundleProblem p;
    p.cameras = cameras;
    p.points = points;
    static const char* cam_names[9] = {"r0", "r1", "r2", "t0", "t1", "t2", "f", "k1", "k2"};
    static const char* pt_names[3] = {"x", "y", "z"};
    for (int c = 0; c < cameras; ++c) {
        for (int j = 0; j < 9; ++j) p.f.add_variable("c" + std::to_string(c) + "_" + cam_names[j], Interval::entire());
    }
    for (int q = 0; q < points; ++q) {
        for (int j = 0; j < 3; ++j) p.f.add_variable("p" + std::to_string(q) + "_" + pt_names[j], Interval::entire());
    }
    for (const auto& o : obs) {
        if (o.camera < 0 || o.camera >= cameras || o.point < 0 || o.point >= points) {
            throw std::invalid_argument("observation references an unknown camera or point");
        }
        p.f.add_term(residual_expr(o.camera, o.point, cameras, 0, o.x));
        p.f.add_term(residual_expr(o.camera, o.point, cameras, 1, o.y));
    }
    p.observations = std::move(obs);
    p.ground_truth = params;
    p.initial = std::move(params);
    return p;
}

BundleProblem make_bundle(const BundleSpec& spec) {
    spec.validate();
    RngStream rng(spec.seed);
    const int C = spec.cameras;
    const int P = spec.points;
    std::vector<double> params(9 * C + 3 * P);
    const double radius = 10.0;
    for (int c = 0; c < C; ++c) {
        const double phi = 0.3 + 2.0 * std::numbers::pi * c / C;
        const Vec3 center{radius * std::sin(phi), 1.5, radius * std::cos(phi)};
        // Camera looks at the origin along -z of its own frame.
        const Vec3 zc = normalized(center);
        const Vec3 xc = normalized(cross({0.0, 1.0, 0.0}, zc));
        const Vec3 yc = cross(zc, xc);
        const std::array<Vec3, 3> R{xc, yc, zc};
        const Vec3 w = log_rotation(R);
        double* cam = &params[camera_var(c, 0)];
        for (int j = 0; j < 3; ++j) cam[j] = w[j];
        const Vec3 Rc = rotate(cam, center.data());
        for (int j = 0; j < 3; ++j) cam[3 + j] = -Rc[j];
        cam[6] = 500.0 * (1.0 + 0.1 * (rng.uniform() - 0.5));
        cam[7] = -0.05 + 0.02 * (rng.uniform() - 0.5);
        cam[8] = 0.01 + 0.01 * (rng.uniform() - 0.5);
    }
    std::vector<Observation> obs;
    for (int q = 0; q < P; ++q) {
        double* X = &params[point_var(C, q, 0)];
        // Redraw until the point is in front of every camera by a margin.
        while (true) {
            for (int j = 0; j < 3; ++j) X[j] = rng.uniform(-1.0, 1.0);
            bool ok = true;
            for (int c = 0; c < C && ok; ++c) {
                Vec3 Pc = rotate(&params[camera_var(c, 0)], X);
                ok = Pc[2] + params[camera_var(c, 5)] < -1.0;
            }
            if (ok) break;
        }
        std::vector<int> seen;
        for (int c = 0; c < C; ++c) {
            if (rng.uniform() < spec.density) seen.push_back(c);
        }
        while (seen.size() < 2) {
            const int c = static_cast<int>(rng.below(C));
            if (std::find(seen.begin(), seen.end(), c) == seen.end()) seen.push_back(c);
        }
        std::sort(seen.begin(), seen.end());
        for (int c : seen) {
            auto uv = bal_project(&params[camera_var(c, 0)], X);
            if (spec.noise > 0.0) {
                uv[0] += spec.noise * rng.normal();
                uv[1] += spec.noise * rng.normal();
            }
            obs.push_back({c, q, uv[0], uv[1]});
        }
    }
    std::sort(obs.begin(), obs.end(),
              [](const Observation& a, const Observation& b) { return std::tie(a.camera, a.point) < std::tie(b.camera, b.point); });
    BundleProblem p = bundle_from_observations(C, P, std::move(obs), params);
    if (spec.param_noise > 0.0) {
        for (auto& v : p.initial) v += spec.param_noise * rng.normal();
    }
    return p;
}

void write_bal(const std::string& path, const BundleProblem& p, const std::vector<double>& params) {
    if (params.size() != p.f.num_variables()) throw std::invalid_argument("parameter vector has the wrong length");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << std::setprecision(17);
    out << p.cameras << ' ' << p.points << ' ' << p.observations.size() << '\n';
    for (const auto& o : p.observations) out << o.camera << ' ' << o.point << ' ' << o.x << ' ' << o.y << '\n';
    for (double v : params) out << v << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

BundleProblem load_bal(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    int line_no = 0;
    std::string line;
    auto next_line = [&](const std::string& expected) {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return;
        }
        throw std::runtime_error(path + ":" + std::to_string(line_no + 1) + ": unexpected end of file, expected " +
                                 expected);
    };
    auto fail = [&](const std::string& what) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
    };

    next_line("header");
    long cameras = 0, points = 0, nobs = 0;
    {
        std::istringstream ss(line);
        if (!(ss >> cameras >> points >> nobs)) fail("malformed header, expected <cameras> <points> <observations>");
        std::string extra;
        if (ss >> extra) fail("malformed header, trailing text");
        if (cameras < 1 || points < 1 || nobs < 0) fail("header counts must be positive");
    }
    std::vector<Observation> obs;
    obs.reserve(nobs);
    for (long i = 0; i < nobs; ++i) {
        next_line("observation " + std::to_string(i));
        std::istringstream ss(line);
        Observation o{};
        if (!(ss >> o.camera >> o.point >> o.x >> o.y)) fail("malformed observation record");
        if (o.camera < 0 || o.camera >= cameras || o.point < 0 || o.point >= points) {
            fail("observation references an unknown camera or point");
        }
        obs.push_back(o);
    }
    std::vector<double> params(9 * cameras + 3 * points);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const bool is_cam = i < static_cast<std::size_t>(9 * cameras);
        const std::string what = is_cam ? "camera " + std::to_string(i / 9) + " parameter " + std::to_string(i % 9)
                                        : "point " + std::to_string((i - 9 * cameras) / 3) + " coordinate " +
                                              std::to_string((i - 9 * cameras) % 3);
        next_line(what);
        std::istringstream ss(line);
        if (!(ss >> params[i])) fail("malformed value for " + what);
    }
    return bundle_from_observations(static_cast<int>(cameras), static_cast<int>(points), std::move(obs),
                                    std::move(params));
}

std::vector<std::vector<int>> bundle_blocks(int cameras, int points) {
    std::vector<std::vector<int>> blocks;
    for (int c = 0; c < cameras; ++c) {
        std::vector<int> b;
        for (int j = 0; j < 9; ++j) b.push_back(camera_var(c, j));
        blocks.push_back(std::move(b));
    }
    for (int q = 0; q < points; ++q) {
        blocks.push_back({point_var(cameras, q, 0), point_var(cameras, q, 1), point_var(cameras, q, 2)});
    }
    return blocks;
}

// ---------------------------------------------------------------------------
// Small families

ObjectiveFunction make_separable_quadratic(int n, double lo, double hi) {
    if (n < 1) throw std::invalid_argument("need at least one variable");
    ObjectiveFunction f;
    for (int i = 0; i < n; ++i) f.add_variable("x" + std::to_string(i + 1), Interval(lo, hi));
    for (int i = 0; i < n; ++i) {
        Expr e;
        const double center = static_cast<double>(i % 9 + 1);
        e.set_root(pow(Sym::var(e, i) - Sym::constant(e, center), 2).ref());
        f.add_term(std::move(e));
    }
    return f;
}

ObjectiveFunction make_double_well(double tilt, double lo, double hi) {
    ObjectiveFunction f;
    f.add_variable("x", Interval(lo, hi));
    Expr e;
    const Sym x = Sym::var(e, 0);
    e.set_root((pow(pow(x, 2) - Sym::constant(e, 1.0), 2) + Sym::constant(e, tilt) * x).ref());
    f.add_term(std::move(e));
    return f;
}

}  // namespace rdis
