#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wakeloc/core.hpp"

namespace wakeloc {

enum class SolveDimension { TwoD, ThreeD };

std::string_view to_string(SolveDimension d);

// Axis-aligned region used to seed particles. In 2D only x/y matter.
struct Box {
    Position3 min;
    Position3 max;
    friend bool operator==(const Box&, const Box&) = default;
};

struct SolverParams {
    int n_particles = 10'000;
    std::optional<Box> box;      // derived from the anchors when absent
    double box_margin = 5.0;     // m, used for the derived box
    double residual_sigma = 0.3e-9;  // s
    int max_iters = 25;
    double step_tolerance = 1e-6;    // m
    double damping = 1e-3;           // initial Levenberg-Marquardt lambda
    SolveDimension dimension = SolveDimension::TwoD;
    double fixed_z = 1.0;            // m, tag height for 2D solves
    double degeneracy_threshold = 1e-6;  // smallest/largest anchor-spread eigenvalue

    std::vector<std::string> violations() const;

    friend bool operator==(const SolverParams&, const SolverParams&) = default;
};

int unknowns(SolveDimension d);

// ---------------------------------------------------------------------------
// Two-way ranging
// ---------------------------------------------------------------------------

// One leg of a nested single-sided exchange, as seen by the polling tag.
struct TwrMeasurement {
    Position3 anchor_position;
    double t_round_local = 0.0;     // s, poll TX to response RX on the tag clock
    double t_reply_nominal = 0.0;   // s, scheduled reply delay
    std::optional<double> t_reply_reported;  // s, anchor clock, from the response payload
    double cfo = 1.0;               // anchor clock rate / tag clock rate

    friend bool operator==(const TwrMeasurement&, const TwrMeasurement&) = default;
};

// Largest accepted |cfo - 1|.
inline constexpr double kMaxCfoDeviation = 1e-3;

struct TwrOptions {
    bool cfo_correction = true;
    double implausible_range = 100.0;  // m
};

// ToF = (t_round - t_reply / cfo) / 2; the reply was counted on the anchor
// clock and dividing by the rate ratio expresses it in tag ticks. Result may
// be slightly negative under noise.
double cc_ss_twr_range(const TwrMeasurement& m, const TwrOptions& options = {});

struct RangeObservation {
    Position3 anchor;
    double range = 0.0;
};

struct PositionEstimate {
    Position3 position;
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    int iterations = 0;
    double cost = 0.0;  // sum of squared residuals at the solution, m^2
};

// Damped Gauss-Newton on sum (|p - X_i| - max(r_i, 0))^2 from the anchor centroid.
// Throws DegenerateGeometry / NoConvergence.
PositionEstimate trilaterate(std::span<const RangeObservation> ranges, const SolverParams& params);

std::vector<double> range_residuals(const Position3& p, std::span<const RangeObservation> ranges);
// d residual_i / d p, one row per range, columns x,y[,z].
Eigen::MatrixXd range_jacobian(const Position3& p, std::span<const RangeObservation> ranges, SolveDimension dim);

// Throws DegenerateGeometry when the anchors are collinear (2D) / coplanar (3D)
// within the conditioning threshold.
void check_anchor_geometry(std::span<const Position3> anchors, SolveDimension dim, double threshold);

// ---------------------------------------------------------------------------
// Downlink TDOA
// ---------------------------------------------------------------------------

// One frame timestamped by a listening tag. The reference frame (poll or
// initiator frame) has reference = true and delta_t = 0; its anchor_position
// is the initiator position.
struct TdoaMeasurement {
    int anchor_index = 0;
    Position3 anchor_position;
    Position3 initiator_position;
    double delta_t = 0.0;   // s, responder wait on its own clock
    double cfo = 1.0;       // responder clock rate / tag clock rate
    Timestamp t_arrival_local;
    bool reference = false;

    friend bool operator==(const TdoaMeasurement&, const TdoaMeasurement&) = default;
};

// Arrival of the frame at candidate p, in tag seconds after t_init:
//   reference: d(init, p)/c
//   response:  d(init, X_i)/c + delta_t/cfo + d(X_i, p)/c
double tdoa_predicted_arrival(const Position3& p, const TdoaMeasurement& m, double t_init = 0.0);

// residual_i = (t_i - t_ref)_measured - (pred_i - pred_ref)(p), seconds, one
// per non-reference measurement in input order. Throws MissingReference.
std::vector<double> tdoa_residuals(const Position3& p, std::span<const TdoaMeasurement> ms);

// Jacobian of the residuals scaled to meters (c * seconds) w.r.t. p.
Eigen::MatrixXd tdoa_jacobian(const Position3& p, std::span<const TdoaMeasurement> ms, SolveDimension dim);

struct ParticleSolution {
    Position3 position;       // refined estimate (or particle mean on fallback)
    Position3 particle_mean;
    double spread = 0.0;      // m, weighted standard deviation of the particles
    bool refined = false;     // false: refinement failed, particle mean returned
    int iterations = 0;
    double cost = 0.0;        // m^2 at `position`
};

// Static particle filter: uniform particles in the box, Gaussian likelihood of
// the residual norm, weighted mean, then Levenberg-Marquardt refinement.
// Throws AllWeightsZero, MissingReference, InvalidArgument.
ParticleSolution particle_filter_solve(std::span<const TdoaMeasurement> ms, const SolverParams& params,
                                       std::mt19937_64& rng);

// Box spanned by the anchors (and initiator) of `ms`, grown by params.box_margin.
Box derived_box(std::span<const TdoaMeasurement> ms, const SolverParams& params);

}  // namespace wakeloc
