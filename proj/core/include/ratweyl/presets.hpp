#pragma once

#include "ratweyl/snode.hpp"

namespace ratweyl::presets {

// Pole structure shared by the bundled presets (and by the sine-Gordon
// x-equation): d = (1, -1), b = (1, 1).
PoleSet two_pole();

// Trigonometric source columns for the two-pole structure.
SourceColumns smooth_columns(const GridSpec& grid);

// Smooth unit-row ground-truth potential for roundtrips (mild derivatives,
// beta_k1(0) != 0 for both poles).
Eigen::RowVector2cd smooth_beta_row(int k, double x);
PotentialField smooth_beta(const GridSpec& grid);

// Variant violating the strict boundary condition at pole 2: beta_21(0) = 0.
Eigen::RowVector2cd boundary_null_beta_row(int k, double x);
PotentialField boundary_null_beta(const GridSpec& grid);

// Pair of potentials equal on [0, l0] and split beyond it (C^2 junction).
Eigen::RowVector2cd split_beta_row(int k, double x, double l0);
PotentialField split_beta(const GridSpec& grid, double l0);

}  // namespace ratweyl::presets
