#pragma once

#include <random>
#include <vector>

#include "bdce/channel_model.hpp"
#include "bdce/types.hpp"

namespace bdce {

struct HybridPrecoder {
  std::vector<CMat> blocks;  // Np blocks, each N x M
  int N() const { return blocks.empty() ? 0 : int(blocks[0].rows()); }
  int M() const { return blocks.empty() ? 0 : int(blocks[0].cols()); }
  int Np() const { return int(blocks.size()); }
};

struct ReceivedSignal {
  CVec y;  // index m*Np + p
  double sigma_z2 = 0;
};

HybridPrecoder build_precoder(std::mt19937_64& rng, const ScenarioConfig& cfg);
// s = blkdiag(F_p)^H h, rows reordered to m*Np + p
CVec apply_measurement(const CVec& h, const HybridPrecoder& F);
// same map applied to every column of a (N*Np) x K matrix
CMat measure_matrix(const CMat& U, const HybridPrecoder& F);
double calibrate_noise(const CVec& s, double snr_db);
ReceivedSignal add_noise(const CVec& s, double sigma_z2, std::mt19937_64& rng);

}  // namespace bdce
