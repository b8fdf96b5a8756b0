// Unvalidated loss evaluation on raw alpha_bar vectors, shared by the public
// loss API and the optimizer's inner loop.

#pragma once

#include "specsched/losses.hpp"

namespace specsched::detail {

/// Loss of the full alpha_bar vector (length S + 1). Returns +inf when the
/// objective is undefined (e.g. zero output variance under KL).
double raw_loss(const SpectralModel& model, const VectorXd& alpha_bar, LossKind kind,
                Process process);

/// Loss and its gradient with respect to every entry of alpha_bar.
double raw_loss_and_gradient(const SpectralModel& model, const VectorXd& alpha_bar,
                             LossKind kind, Process process, VectorXd& grad_full);

}  // namespace specsched::detail
