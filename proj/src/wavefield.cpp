#include "muxdet/wavefield.hpp"

#include <cmath>
#include <numbers>

#include "muxdet/fft.hpp"

namespace muxdet {
namespace {

// DFT-ordered frequency of bin k on an n-point axis with spacing `pitch`.
Real dft_freq(std::size_t k, std::size_t n, Real pitch) {
  const auto ik = static_cast<long>(k);
  const auto in = static_cast<long>(n);
  const long f = (ik <= (in - 1) / 2) ? ik : ik - in;
  return static_cast<Real>(f) / (static_cast<Real>(n) * pitch);
}

ComplexGrid embed(const ComplexGrid& g, std::size_t R, std::size_t C) {
  ComplexGrid out(R, C);
  const std::size_t r0 = (R - g.rows()) / 2, c0 = (C - g.cols()) / 2;
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) out(r0 + r, c0 + c) = g(r, c);
  return out;
}

ComplexGrid crop(const ComplexGrid& g, std::size_t R, std::size_t C) {
  ComplexGrid out(R, C);
  const std::size_t r0 = (g.rows() - R) / 2, c0 = (g.cols() - C) / 2;
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out(r, c) = g(r0 + r, c0 + c);
  return out;
}

// Shared core: the adjoint of exp(i*k_z*z) on the propagating band is the
// same multiplier conjugated, so both directions run through here.
Field propagate_impl(const Field& field, const PropagationPlan& plan,
                     bool conjugate) {
  validate(field);
  if (plan.pad_factor != 1 && plan.pad_factor != 2)
    throw std::invalid_argument("pad_factor must be 1 or 2");

  const std::size_t R = field.rows(), C = field.cols();
  const std::size_t Rp = R * static_cast<std::size_t>(plan.pad_factor);
  const std::size_t Cp = C * static_cast<std::size_t>(plan.pad_factor);

  ComplexGrid work =
      (plan.pad_factor == 1) ? field.amplitude : embed(field.amplitude, Rp, Cp);
  fft2(work);

  const Real lambda = field.wavelength_um;
  const Real inv_l2 = 1.0 / (lambda * lambda);
  const Real z = plan.distance_um;
  const Real two_pi = 2.0 * std::numbers::pi;

  // Band-limit bound per axis (anti-aliasing of the sampled transfer
  // function at long distances): fmax = 1/(lambda*sqrt((2*df*z)^2 + 1)).
  Real fx_max = 0.0, fy_max = 0.0;
  if (plan.band_limit) {
    const Real dfx = 1.0 / (static_cast<Real>(Cp) * field.pitch_um);
    const Real dfy = 1.0 / (static_cast<Real>(Rp) * field.pitch_um);
    fx_max = 1.0 / (lambda * std::sqrt((2.0 * dfx * z) * (2.0 * dfx * z) + 1.0));
    fy_max = 1.0 / (lambda * std::sqrt((2.0 * dfy * z) * (2.0 * dfy * z) + 1.0));
  }

  for (std::size_t r = 0; r < Rp; ++r) {
    const Real fy = dft_freq(r, Rp, field.pitch_um);
    for (std::size_t c = 0; c < Cp; ++c) {
      const Real fx = dft_freq(c, Cp, field.pitch_um);
      const Real arg = inv_l2 - fx * fx - fy * fy;
      bool pass = arg > 0.0;  // evanescent components are dropped
      if (plan.band_limit &&
          (std::abs(fx) > fx_max || std::abs(fy) > fy_max))
        pass = false;
      if (!pass) {
        work(r, c) = Complex(0.0, 0.0);
        continue;
      }
      Real phase = two_pi * z * std::sqrt(arg);
      if (conjugate) phase = -phase;
      work(r, c) *= Complex(std::cos(phase), std::sin(phase));
    }
  }

  ifft2(work);

  Field out;
  out.pitch_um = field.pitch_um;
  out.wavelength_um = field.wavelength_um;
  out.amplitude = (plan.pad_factor == 1) ? std::move(work) : crop(work, R, C);
  return out;
}

}  // namespace

void validate(const Field& f) {
  if (f.rows() == 0 || f.cols() == 0)
    throw std::invalid_argument("Field: empty grid");
  if (!(f.pitch_um > 0.0) || !(f.wavelength_um > 0.0))
    throw std::invalid_argument("Field: pitch and wavelength must be > 0");
  for (const Complex& z : f.amplitude)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw std::invalid_argument("Field: non-finite amplitude");
}

bool undersampled(const Field& f) { return f.pitch_um > f.wavelength_um / 2.0; }

Field propagate(const Field& field, const PropagationPlan& plan) {
  return propagate_impl(field, plan, /*conjugate=*/false);
}

Field propagate_adjoint(const Field& cotangent, const PropagationPlan& plan) {
  return propagate_impl(cotangent, plan, /*conjugate=*/true);
}

Field apply_phase(const Field& field, const RealGrid& phase) {
  if (phase.rows() != field.rows() || phase.cols() != field.cols())
    throw std::invalid_argument("apply_phase: phase grid shape mismatch");
  Field out = field;
  for (std::size_t r = 0; r < field.rows(); ++r)
    for (std::size_t c = 0; c < field.cols(); ++c)
      out.amplitude(r, c) *=
          Complex(std::cos(phase(r, c)), std::sin(phase(r, c)));
  return out;
}

RealGrid intensity(const Field& field) {
  RealGrid out(field.rows(), field.cols());
  for (std::size_t r = 0; r < field.rows(); ++r)
    for (std::size_t c = 0; c < field.cols(); ++c)
      out(r, c) = std::norm(field.amplitude(r, c));
  return out;
}

}  // namespace muxdet
