#pragma once

// Single I_Na,K neuron and the gap-junction coupled integrator/resonator pair.
//
//   C dV/dt = -(g_L (V - E_L) + g_Na m_inf(V) (V - E_Na) + g_K n (V - E_K)) + C I
//     dn/dt = (n_inf(V) - n) / tau
//
// The coupled system adds q1 (V2 - V1) to the first voltage equation and
// q2 (V1 - V2) to the second. Drive currents enter outside the 1/C factor.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "inak/error.hpp"

namespace inak {

/// Steady-state activation 1 / (1 + exp((half - V) / slope)).
[[nodiscard]] inline double gating_inf(double V, double half, double slope) noexcept
{
    return 1.0 / (1.0 + std::exp((half - V) / slope));
}

/// d/dV of gating_inf.
[[nodiscard]] inline double gating_inf_dv(double V, double half, double slope) noexcept
{
    const double g = gating_inf(V, half, slope);
    return g * (1.0 - g) / slope;
}

struct NeuronParams {
    double C = 1.0;      // uF/cm^2
    double g_L = 8.0;    // mS/cm^2
    double E_L = -80.0;  // mV
    double g_Na = 20.0;
    double E_Na = 60.0;
    double g_K = 10.0;
    double E_K = -90.0;
    double m_half = -20.0; // mV
    double k_m = 15.0;
    double n_half = -30.0;
    double k_n = 5.0;
    double tau = 1.0; // ms
    double I = 0.0;   // uA/cm^2

    /// Throws ConfigInvalid when a physical constraint is violated.
    void validate() const
    {
        auto fail = [](const char* msg) { throw Error(ErrorKind::ConfigInvalid, msg); };
        if (!(C > 0.0)) fail("C must be positive");
        if (!(tau > 0.0)) fail("tau must be positive");
        if (!(k_m > 0.0) || !(k_n > 0.0)) fail("gating slopes must be positive");
        if (g_L < 0.0 || g_Na < 0.0 || g_K < 0.0) fail("conductances must be non-negative");
        if (!(E_K < E_L && E_L < E_Na)) fail("reversal potentials must satisfy E_K < E_L < E_Na");
    }

    [[nodiscard]] double m_inf(double V) const noexcept { return gating_inf(V, m_half, k_m); }
    [[nodiscard]] double n_inf(double V) const noexcept { return gating_inf(V, n_half, k_n); }

    /// Ionic current divided by C with the sign of dV/dt (drive excluded).
    [[nodiscard]] double total_current(double V, double n) const noexcept
    {
        return -(g_L * (V - E_L) + g_Na * m_inf(V) * (V - E_Na) + g_K * n * (V - E_K)) / C;
    }

    /// (d total_current / dV, d total_current / dn).
    [[nodiscard]] Eigen::Vector2d total_current_grad(double V, double n) const noexcept
    {
        const double dm = gating_inf_dv(V, m_half, k_m);
        const double dV = -(g_L + g_Na * (dm * (V - E_Na) + m_inf(V)) + g_K * n) / C;
        const double dn = -g_K * (V - E_K) / C;
        return {dV, dn};
    }
};

/// Integrator neuron (type I, n_half = -30).
[[nodiscard]] inline NeuronParams integrator_neuron(double I = 0.0)
{
    NeuronParams p;
    p.n_half = -30.0;
    p.I = I;
    return p;
}

/// Resonator neuron (type II, n_half = -45).
[[nodiscard]] inline NeuronParams resonator_neuron(double I = 0.0)
{
    NeuronParams p;
    p.n_half = -45.0;
    p.I = I;
    return p;
}

struct NeuronState {
    double V = 0.0;
    double n = 0.0;

    [[nodiscard]] Eigen::Vector2d vec() const { return {V, n}; }
    static NeuronState from(const Eigen::Vector2d& y) { return {y[0], y[1]}; }
};

struct CoupledState {
    double V1 = 0.0;
    double n1 = 0.0;
    double V2 = 0.0;
    double n2 = 0.0;

    [[nodiscard]] Eigen::Vector4d vec() const { return {V1, n1, V2, n2}; }
    static CoupledState from(const Eigen::Vector4d& y) { return {y[0], y[1], y[2], y[3]}; }
};

[[nodiscard]] inline Eigen::Vector2d rhs_single(const NeuronParams& p, const Eigen::Vector2d& y) noexcept
{
    const double V = y[0];
    const double n = y[1];
    return {p.total_current(V, n) + p.I, (p.n_inf(V) - n) / p.tau};
}

[[nodiscard]] inline NeuronState rhs_single(const NeuronParams& p, const NeuronState& s) noexcept
{
    return NeuronState::from(rhs_single(p, s.vec()));
}

[[nodiscard]] inline Eigen::Matrix2d jacobian_single(const NeuronParams& p, const Eigen::Vector2d& y) noexcept
{
    const Eigen::Vector2d g = p.total_current_grad(y[0], y[1]);
    Eigen::Matrix2d J;
    J << g[0], g[1], gating_inf_dv(y[0], p.n_half, p.k_n) / p.tau, -1.0 / p.tau;
    return J;
}

/// Planar vector field of one neuron; the drive current I is the natural parameter.
struct SingleNeuron {
    static constexpr int dim = 2;
    using Vector = Eigen::Vector2d;
    using Matrix = Eigen::Matrix2d;

    NeuronParams params;

    [[nodiscard]] Vector rhs(const Vector& y) const noexcept { return rhs_single(params, y); }
    [[nodiscard]] Matrix jacobian(const Vector& y) const noexcept { return jacobian_single(params, y); }

    [[nodiscard]] double parameter() const noexcept { return params.I; }
    [[nodiscard]] SingleNeuron with_parameter(double I) const
    {
        SingleNeuron s = *this;
        s.params.I = I;
        return s;
    }
    [[nodiscard]] Vector parameter_derivative(const Vector&) const noexcept { return {1.0, 0.0}; }
};

/// Two I_Na,K neurons joined by a linear gap junction. The drives I1 and I2
/// are neuron1.I and neuron2.I. q2 is the continuation parameter.
class CoupledSystem {
public:
    static constexpr int dim = 4;
    using Vector = Eigen::Vector4d;
    using Matrix = Eigen::Matrix4d;

    CoupledSystem() : CoupledSystem(integrator_neuron(), resonator_neuron(), 0.05, 0.0) {}

    CoupledSystem(NeuronParams neuron1, NeuronParams neuron2, double q1, double q2)
        : n1_(neuron1), n2_(neuron2), q1_(q1), q2_(q2)
    {
        n1_.validate();
        n2_.validate();
        if (!(q1_ >= 0.0) || !(q2_ >= 0.0)) {
            throw Error(ErrorKind::ConfigInvalid, "coupling strengths must be non-negative");
        }
    }

    [[nodiscard]] const NeuronParams& neuron1() const noexcept { return n1_; }
    [[nodiscard]] const NeuronParams& neuron2() const noexcept { return n2_; }
    [[nodiscard]] double q1() const noexcept { return q1_; }
    [[nodiscard]] double q2() const noexcept { return q2_; }
    [[nodiscard]] double I1() const noexcept { return n1_.I; }
    [[nodiscard]] double I2() const noexcept { return n2_.I; }

    [[nodiscard]] CoupledSystem with_q2(double q2) const { return {n1_, n2_, q1_, q2}; }

    [[nodiscard]] Vector rhs(const Vector& y) const noexcept
    {
        const double V1 = y[0], w1 = y[1], V2 = y[2], w2 = y[3];
        return {n1_.total_current(V1, w1) + n1_.I + q1_ * (V2 - V1),
                (n1_.n_inf(V1) - w1) / n1_.tau,
                n2_.total_current(V2, w2) + n2_.I + q2_ * (V1 - V2),
                (n2_.n_inf(V2) - w2) / n2_.tau};
    }

    [[nodiscard]] CoupledState rhs(const CoupledState& s) const noexcept { return CoupledState::from(rhs(s.vec())); }

    [[nodiscard]] Matrix jacobian(const Vector& y) const noexcept
    {
        Matrix J = Matrix::Zero();
        J.block<2, 2>(0, 0) = jacobian_single(n1_, y.segment<2>(0));
        J.block<2, 2>(2, 2) = jacobian_single(n2_, y.segment<2>(2));
        J(0, 0) -= q1_;
        J(0, 2) += q1_;
        J(2, 2) -= q2_;
        J(2, 0) += q2_;
        return J;
    }

    [[nodiscard]] double parameter() const noexcept { return q2_; }
    [[nodiscard]] CoupledSystem with_parameter(double q2) const { return with_q2(q2); }
    /// d rhs / d q2.
    [[nodiscard]] Vector parameter_derivative(const Vector& y) const noexcept { return {0.0, 0.0, y[0] - y[2], 0.0}; }

private:
    NeuronParams n1_;
    NeuronParams n2_;
    double q1_;
    double q2_;
};

[[nodiscard]] inline CoupledState rhs_coupled(const CoupledSystem& c, const CoupledState& s) noexcept { return c.rhs(s); }

[[nodiscard]] inline Eigen::Matrix4d jacobian(const CoupledSystem& c, const CoupledState& s) noexcept
{
    return c.jacobian(s.vec());
}

} // namespace inak
