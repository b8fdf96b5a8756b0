// Closed-form distances between the generated Gaussian N(D2 mu, e^2) and the
// target N(mu, lambda), coordinatewise in the eigenbasis, where
// e^2 = input_variance * D1^2 + var_extra is the total output variance.
//
// All values are squared distances (W2^2), not roots.

#pragma once

#include "specsched/core.hpp"

#include <string>

namespace specsched {

enum class LossKind { wasserstein2, kl, weighted_l1 };

/// "w2", "kl", "wl1".
std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);

/// sum (sqrt(lambda) - e)^2 + sum mu^2 (D2 - 1)^2.
double w2_loss(const SpectralModel& model, const Transfer& transfer);

/// KL(target || generated), restricted to coordinates with lambda >= kEigenvalueFloor.
double kl_loss(const SpectralModel& model, const Transfer& transfer);

/// sum (lambda / sum lambda) |e^2 - lambda| + sum (mu^2 / sum mu^2) (D2 - 1)^2;
/// the mean term is dropped when mu = 0.
double weighted_l1_loss(const SpectralModel& model, const Transfer& transfer);

double loss_value(LossKind kind, const SpectralModel& model, const Transfer& transfer);

/// Transfer of the schedule under `process`, then the loss.
double schedule_loss(const SpectralModel& model, const Schedule& schedule, LossKind kind,
                     Process process);

/// Central finite-difference gradient with respect to the interior entries
/// alpha_bar_1 .. alpha_bar_{S-1}. The step h = rel_step * max(1, |alpha_bar_s|)
/// is clipped to half the distance to each neighbour; with a zero gap on one
/// side a one-sided difference is used.
VectorXd loss_gradient(const SpectralModel& model, const Schedule& schedule, LossKind kind,
                       Process process, double rel_step = 1e-7);

/// Exact gradient over the interior entries via reverse-mode accumulation
/// through the transfer recurrences. O(S d).
VectorXd analytic_loss_gradient(const SpectralModel& model, const Schedule& schedule,
                                LossKind kind, Process process);

}  // namespace specsched
