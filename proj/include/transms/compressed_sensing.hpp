#pragma once

#include <vector>

#include "transms/dc_projection.hpp"

namespace transms {

/// Unitary 2D DFT of a row-major map.
VectorXcd fft2(const VectorXcd& map, Grid grid);
VectorXcd ifft2(const VectorXcd& spectrum, Grid grid);

struct CsProblem {
  Grid grid;                   // HR grid
  std::vector<Index> indices;  // measured voxels, sorted
  VectorXcd measured;          // one value per index
  double epsilon = 0.0;        // data-fidelity bound
  double mu = 1.0;             // ADMM penalty
  int iterations = 1000;
  /// Zero border added on every side during the solve and cropped after.
  int pad = 4;
  /// Scale the row to unit peak magnitude before solving.
  bool normalize = true;
};

struct CsResult {
  VectorXcd row;
  double residual = 0.0;                // ||M a - b|| of the returned row
  double primal_residual = 0.0;         // split mismatch at the last iterate
  std::vector<double> objective_trace;  // ||F a||_1 per iteration (normalised units)
  bool converged = false;               // primal residual below 1e-6 relative
  /// Rises of the objective by more than 1e-6 relative over the second half.
  int objective_increases = 0;
};

/// min ||F a||_1 subject to ||M a - b|| <= epsilon by scaled-form ADMM with
/// splits z = F a and v = M a. The measured entries of the last iterate are
/// projected onto the noise ball before returning.
CsResult cs_recover(const CsProblem& p);

/// Row-wise CS recovery of an SM from masked samples. Per-row epsilon is
/// sqrt(|mask|) sigma_i when sigma is known, else 0.
SystemMatrix cs_recover_sm(const MaskedSamples& samples, const CsProblem& settings);

}  // namespace transms
