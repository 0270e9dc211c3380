#include "wakeloc/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wakeloc/kernels.hpp"

namespace wakeloc {

namespace {

// Unknown vector <-> position, z pinned in 2D.
Position3 from_vector(const Eigen::VectorXd& v, double fixed_z) {
    return v.size() == 2 ? Position3{v[0], v[1], fixed_z} : Position3{v[0], v[1], v[2]};
}

Eigen::VectorXd to_vector(const Position3& p, int n) {
    Eigen::VectorXd v(n);
    v[0] = p.x;
    v[1] = p.y;
    if (n == 3) v[2] = p.z;
    return v;
}

void unit_row(Eigen::MatrixXd& J, Eigen::Index row, const Position3& p, const Position3& from, double sign, int n) {
    const double d = distance(p, from);
    if (d == 0.0) return;
    J(row, 0) += sign * (p.x - from.x) / d;
    J(row, 1) += sign * (p.y - from.y) / d;
    if (n == 3) J(row, 2) += sign * (p.z - from.z) / d;
}

struct LmResult {
    Position3 position;
    int iterations = 0;
    bool converged = false;
    double cost = 0.0;
    Eigen::MatrixXd jacobian;
};

// Levenberg-Marquardt with Marquardt scaling. `eval(p, r, J)` fills the
// residuals and, when J is non-null, the Jacobian.
template <class Eval>
LmResult levenberg_marquardt(const Position3& start, const SolverParams& params, Eval&& eval) {
    const int n = unknowns(params.dimension);
    Eigen::VectorXd x = to_vector(start, n);
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    Position3 p = from_vector(x, params.fixed_z);
    eval(p, r, &J);
    double cost = r.squaredNorm();
    double lambda = params.damping;

    LmResult out;
    for (int it = 1; it <= params.max_iters; ++it) {
        out.iterations = it;
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        Eigen::MatrixXd damped = A;
        for (int k = 0; k < n; ++k) damped(k, k) += lambda * std::max(A(k, k), 1e-12);
        const Eigen::VectorXd step = damped.ldlt().solve(-g);
        if (!step.allFinite()) break;

        const Eigen::VectorXd x_new = x + step;
        const Position3 p_new = from_vector(x_new, params.fixed_z);
        Eigen::VectorXd r_new;
        eval(p_new, r_new, nullptr);
        const double cost_new = r_new.squaredNorm();
        const bool small = step.norm() < params.step_tolerance;
        if (cost_new <= cost) {
            x = x_new;
            p = p_new;
            eval(p, r, &J);
            cost = r.squaredNorm();
            lambda = std::max(lambda / 10.0, 1e-12);
        } else {
            lambda *= 10.0;
        }
        if (small) {
            out.converged = true;
            break;
        }
    }
    out.position = p;
    out.cost = cost;
    out.jacobian = std::move(J);
    return out;
}

// TDOA measurements reduced to meters: residual_i(p) = offset_i - d(p, X_i) + d(p, ref).
struct TdoaProblem {
    Position3 ref;
    std::vector<Position3> anchors;
    std::vector<double> offset_m;
};

TdoaProblem reduce(std::span<const TdoaMeasurement> ms) {
    const TdoaMeasurement* ref = nullptr;
    for (const auto& m : ms) {
        if (!m.reference) continue;
        if (ref != nullptr) throw Error(Errc::InvalidArgument, "more than one reference measurement");
        ref = &m;
    }
    if (ref == nullptr) throw Error(Errc::MissingReference, "no reference (poll/init) measurement");

    TdoaProblem prob;
    prob.ref = ref->anchor_position;
    for (const auto& m : ms) {
        if (m.reference) continue;
        if (!(m.cfo > 0.0)) throw Error(Errc::InvalidArgument, "cfo must be positive");
        const double measured = seconds_between(m.t_arrival_local, ref->t_arrival_local);
        const double known = distance(m.initiator_position, m.anchor_position) / kSpeedOfLight + m.delta_t / m.cfo;
        prob.anchors.push_back(m.anchor_position);
        prob.offset_m.push_back(kSpeedOfLight * (measured - known));
    }
    return prob;
}

void tdoa_eval(const TdoaProblem& prob, const Position3& p, int n, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    const auto m = static_cast<Eigen::Index>(prob.anchors.size());
    r.resize(m);
    const double d_ref = distance(p, prob.ref);
    for (Eigen::Index i = 0; i < m; ++i) {
        r[i] = prob.offset_m[static_cast<std::size_t>(i)] - distance(p, prob.anchors[static_cast<std::size_t>(i)]) + d_ref;
    }
    if (J == nullptr) return;
    J->setZero(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
        unit_row(*J, i, p, prob.anchors[static_cast<std::size_t>(i)], -1.0, n);
        unit_row(*J, i, p, prob.ref, +1.0, n);
    }
}

void range_eval(std::span<const RangeObservation> ranges, const Position3& p, int n, Eigen::VectorXd& r,
                Eigen::MatrixXd* J) {
    const auto m = static_cast<Eigen::Index>(ranges.size());
    r.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& o = ranges[static_cast<std::size_t>(i)];
        r[i] = distance(p, o.anchor) - std::max(o.range, 0.0);
    }
    if (J == nullptr) return;
    J->setZero(m, n);
    for (Eigen::Index i = 0; i < m; ++i) unit_row(*J, i, p, ranges[static_cast<std::size_t>(i)].anchor, 1.0, n);
}

double tdoa_cost_at(const TdoaProblem& prob, const Position3& p) {
    Eigen::VectorXd r;
    tdoa_eval(prob, p, 2, r, nullptr);
    return r.squaredNorm();
}

std::size_t required_measurements(SolveDimension dim) {
    return dim == SolveDimension::TwoD ? 3 : 4;
}

}  // namespace

std::string_view to_string(SolveDimension d) {
    return d == SolveDimension::TwoD ? "2d" : "3d";
}

int unknowns(SolveDimension d) {
    return d == SolveDimension::TwoD ? 2 : 3;
}

std::vector<std::string> SolverParams::violations() const {
    std::vector<std::string> out;
    if (n_particles < 100) out.emplace_back("solver.n_particles must be >= 100");
    if (!(residual_sigma > 0.0)) out.emplace_back("solver.residual_sigma_s must be > 0");
    if (max_iters < 1) out.emplace_back("solver.max_iters must be >= 1");
    if (!(step_tolerance > 0.0)) out.emplace_back("solver.step_tolerance_m must be > 0");
    if (!(damping >= 0.0)) out.emplace_back("solver.damping must be >= 0");
    if (!(box_margin >= 0.0)) out.emplace_back("solver.box_margin_m must be >= 0");
    if (!std::isfinite(fixed_z)) out.emplace_back("solver.fixed_z_m must be finite");
    if (!(degeneracy_threshold > 0.0 && degeneracy_threshold < 1.0)) {
        out.emplace_back("solver.degeneracy_threshold must be in (0, 1)");
    }
    if (box) {
        const bool flat = !(box->max.x > box->min.x) || !(box->max.y > box->min.y) ||
                          (dimension == SolveDimension::ThreeD && !(box->max.z > box->min.z));
        if (flat) out.emplace_back("solver.box must have positive extent");
    }
    return out;
}

// ---------------------------------------------------------------------------

double cc_ss_twr_range(const TwrMeasurement& m, const TwrOptions& options) {
    // The reply is counted on the anchor clock, so the round may read shorter
    // than the nominal reply by up to the clock-rate bound.
    if (!(m.t_reply_nominal > 0.0) || !(m.t_round_local > m.t_reply_nominal * (1.0 - kMaxCfoDeviation))) {
        throw Error(Errc::InvalidArgument, "TWR measurement requires t_round > t_reply > 0");
    }
    if (!(std::fabs(m.cfo - 1.0) < kMaxCfoDeviation)) throw Error(Errc::InvalidArgument, "cfo outside 1 +- 1e-3");
    const double t_reply = m.t_reply_reported.value_or(m.t_reply_nominal);
    const double scale = options.cfo_correction ? 1.0 / m.cfo : 1.0;
    const double tof = 0.5 * (m.t_round_local - t_reply * scale);
    const double range = kSpeedOfLight * tof;
    if (std::fabs(range) > options.implausible_range) {
        throw Error(Errc::ImplausibleRange, "TWR range " + std::to_string(range) + " m is implausible");
    }
    return range;
}

void check_anchor_geometry(std::span<const Position3> anchors, SolveDimension dim, double threshold) {
    const int n = unknowns(dim);
    if (anchors.empty()) throw Error(Errc::DegenerateGeometry, "no anchors");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (const auto& a : anchors) mean += to_vector(a, n);
    mean /= static_cast<double>(anchors.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (const auto& a : anchors) {
        const Eigen::VectorXd d = to_vector(a, n) - mean;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd ev = eig.eigenvalues();
    const double hi = ev.maxCoeff();
    if (!(hi > 0.0) || ev.minCoeff() / hi < threshold) {
        throw Error(Errc::DegenerateGeometry,
                    dim == SolveDimension::TwoD ? "anchors are collinear" : "anchors are coplanar");
    }
}

std::vector<double> range_residuals(const Position3& p, std::span<const RangeObservation> ranges) {
    Eigen::VectorXd r;
    range_eval(ranges, p, 3, r, nullptr);
    return {r.data(), r.data() + r.size()};
}

Eigen::MatrixXd range_jacobian(const Position3& p, std::span<const RangeObservation> ranges, SolveDimension dim) {
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    range_eval(ranges, p, unknowns(dim), r, &J);
    return J;
}

PositionEstimate trilaterate(std::span<const RangeObservation> ranges, const SolverParams& params) {
    if (ranges.size() < required_measurements(params.dimension)) {
        throw Error(Errc::InvalidArgument, "trilateration needs " +
                                               std::to_string(required_measurements(params.dimension)) +
                                               " ranges in " + std::string(to_string(params.dimension)));
    }
    std::vector<Position3> anchors;
    anchors.reserve(ranges.size());
    Position3 centroid;
    for (const auto& o : ranges) {
        if (!o.anchor.finite() || !std::isfinite(o.range)) throw Error(Errc::InvalidArgument, "non-finite range input");
        anchors.push_back(o.anchor);
        centroid = centroid + o.anchor;
    }
    check_anchor_geometry(anchors, params.dimension, params.degeneracy_threshold);
    centroid = (1.0 / static_cast<double>(ranges.size())) * centroid;
    if (params.dimension == SolveDimension::TwoD) centroid.z = params.fixed_z;

    const int n = unknowns(params.dimension);
    const auto fit = levenberg_marquardt(centroid, params, [&](const Position3& p, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
        range_eval(ranges, p, n, r, J);
    });
    if (!fit.converged) throw Error(Errc::NoConvergence, "trilateration did not converge");

    PositionEstimate est;
    est.position = fit.position;
    est.iterations = fit.iterations;
    est.cost = fit.cost;
    const auto m = static_cast<double>(ranges.size());
    const double sigma2 = m > n ? fit.cost / (m - n) : 0.0;
    const Eigen::MatrixXd A = fit.jacobian.transpose() * fit.jacobian;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.isInvertible()) est.covariance.topLeftCorner(n, n) = lu.inverse() * sigma2;
    return est;
}

// ---------------------------------------------------------------------------

double tdoa_predicted_arrival(const Position3& p, const TdoaMeasurement& m, double t_init) {
    if (m.reference) return t_init + distance(m.anchor_position, p) / kSpeedOfLight;
    return t_init + distance(m.initiator_position, m.anchor_position) / kSpeedOfLight + m.delta_t / m.cfo +
           distance(m.anchor_position, p) / kSpeedOfLight;
}

std::vector<double> tdoa_residuals(const Position3& p, std::span<const TdoaMeasurement> ms) {
    const TdoaProblem prob = reduce(ms);
    Eigen::VectorXd r;
    tdoa_eval(prob, p, 3, r, nullptr);
    std::vector<double> out(static_cast<std::size_t>(r.size()));
    for (Eigen::Index i = 0; i < r.size(); ++i) out[static_cast<std::size_t>(i)] = r[i] / kSpeedOfLight;
    return out;
}

Eigen::MatrixXd tdoa_jacobian(const Position3& p, std::span<const TdoaMeasurement> ms, SolveDimension dim) {
    const TdoaProblem prob = reduce(ms);
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    tdoa_eval(prob, p, unknowns(dim), r, &J);
    return J;
}

Box derived_box(std::span<const TdoaMeasurement> ms, const SolverParams& params) {
    if (ms.empty()) throw Error(Errc::EmptyInput, "no measurements");
    constexpr double inf = std::numeric_limits<double>::infinity();
    Position3 lo{inf, inf, inf};
    Position3 hi{-inf, -inf, -inf};
    auto grow = [&](const Position3& q) {
        lo = {std::min(lo.x, q.x), std::min(lo.y, q.y), std::min(lo.z, q.z)};
        hi = {std::max(hi.x, q.x), std::max(hi.y, q.y), std::max(hi.z, q.z)};
    };
    for (const auto& m : ms) {
        grow(m.anchor_position);
        grow(m.initiator_position);
    }
    const double g = params.box_margin;
    Box box{{lo.x - g, lo.y - g, lo.z - g}, {hi.x + g, hi.y + g, hi.z + g}};
    if (params.dimension == SolveDimension::TwoD) box.min.z = box.max.z = params.fixed_z;
    return box;
}

ParticleSolution particle_filter_solve(std::span<const TdoaMeasurement> ms, const SolverParams& params,
                                       std::mt19937_64& rng) {
    if (auto v = params.violations(); !v.empty()) throw Error(Errc::InvalidArgument, "invalid solver parameters", v);
    const TdoaProblem prob = reduce(ms);
    if (prob.anchors.size() < required_measurements(params.dimension)) {
        throw Error(Errc::InvalidArgument, "too few TDOA measurements for a " +
                                               std::string(to_string(params.dimension)) + " solve");
    }
    const Box box = params.box.value_or(derived_box(ms, params));
    const bool three_d = params.dimension == SolveDimension::ThreeD;
    if (!(box.max.x > box.min.x) || !(box.max.y > box.min.y) || (three_d && !(box.max.z > box.min.z))) {
        throw Error(Errc::InvalidArgument, "particle box has no extent");
    }

    const auto np = static_cast<std::size_t>(params.n_particles);
    std::vector<double> px(np), py(np), pz(np), cost(np);
    std::uniform_real_distribution<double> ux(box.min.x, box.max.x);
    std::uniform_real_distribution<double> uy(box.min.y, box.max.y);
    std::uniform_real_distribution<double> uz(box.min.z, three_d ? box.max.z : box.min.z + 1.0);
    for (std::size_t k = 0; k < np; ++k) {
        px[k] = ux(rng);
        py[k] = uy(rng);
        pz[k] = three_d ? uz(rng) : params.fixed_z;
    }

    std::vector<double> ax, ay, az;
    for (const auto& a : prob.anchors) {
        ax.push_back(a.x);
        ay.push_back(a.y);
        az.push_back(a.z);
    }
    kernels::TdoaCostTerms terms{ax, ay, az, prob.offset_m, prob.ref.x, prob.ref.y, prob.ref.z};
    kernels::tdoa_cost(terms, px, py, pz, cost);

    // Log-weights; the common maximum is factored out before exponentiating.
    const double sigma_m = kSpeedOfLight * params.residual_sigma;
    const double inv = 1.0 / (2.0 * sigma_m * sigma_m);
    std::size_t best = 0;
    for (std::size_t k = 1; k < np; ++k) {
        if (cost[k] < cost[best]) best = k;
    }
    const double max_lw = -cost[best] * inv;
    if (!(max_lw > -700.0)) {
        throw Error(Errc::AllWeightsZero, "every particle has negligible likelihood; residual_sigma too small");
    }
    double wsum = 0.0;
    Position3 mean;
    std::vector<double> w(np);
    for (std::size_t k = 0; k < np; ++k) {
        w[k] = std::exp(-cost[k] * inv - max_lw);
        wsum += w[k];
        mean = mean + w[k] * Position3{px[k], py[k], pz[k]};
    }
    mean = (1.0 / wsum) * mean;
    double var = 0.0;
    for (std::size_t k = 0; k < np; ++k) {
        const double dx = px[k] - mean.x;
        const double dy = py[k] - mean.y;
        const double dz = pz[k] - mean.z;
        var += w[k] * (dx * dx + dy * dy + dz * dz);
    }

    ParticleSolution sol;
    sol.particle_mean = mean;
    sol.spread = std::sqrt(var / wsum);

    const int n = unknowns(params.dimension);
    auto eval = [&](const Position3& p, Eigen::VectorXd& r, Eigen::MatrixXd* J) { tdoa_eval(prob, p, n, r, J); };
    auto fit = levenberg_marquardt(mean, params, eval);
    // A mean straddling two modes can sit in the wrong basin; the best particle
    // is a second starting point.
    const Position3 best_p{px[best], py[best], pz[best]};
    if (!fit.converged || fit.cost > tdoa_cost_at(prob, best_p)) {
        auto alt = levenberg_marquardt(best_p, params, eval);
        if (alt.converged && (!fit.converged || alt.cost < fit.cost)) fit = std::move(alt);
    }
    if (fit.converged) {
        sol.position = fit.position;
        sol.refined = true;
        sol.iterations = fit.iterations;
        sol.cost = fit.cost;
    } else {
        sol.position = mean;
        sol.refined = false;
        sol.iterations = fit.iterations;
        sol.cost = tdoa_cost_at(prob, mean);
    }
    return sol;
}

}  // namespace wakeloc
