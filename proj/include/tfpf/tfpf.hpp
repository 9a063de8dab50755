#pragma once

// Everything except the quadrature oracle (kernel_oracle.hpp, needs boost)
// and the command layer (experiment.hpp, needs openssl and nlohmann/json).
#include "tfpf/temporal_mesh.hpp"
#include "tfpf/fractional_kernels.hpp"
#include "tfpf/spectral_domain.hpp"
#include "tfpf/potentials.hpp"
#include "tfpf/krylov.hpp"
#include "tfpf/models.hpp"
#include "tfpf/diagnostics.hpp"
#include "tfpf/io.hpp"
