#pragma once

#include <string>

#include "mnarsens/inference.hpp"
#include "mnarsens/influence.hpp"
#include "mnarsens/missingness.hpp"
#include "mnarsens/pseudoscore.hpp"
#include "mnarsens/simulator.hpp"

namespace mnarsens {

// JSON renderings of the result types (nlohmann serialization kept out of the
// public headers so core stays light to include).
std::string missingness_json(const MissingnessFit& fit);
std::string functional_fit_json(const FunctionalFit& fit);
std::string band_json(const BandResult& band, int cause, std::uint64_t seed, int boot,
                      int units);
std::string robustness_json(const RobustnessResult& result, int cause,
                            std::uint64_t seed, int boot);
std::string sim_report_json(const SimReport& report);
std::string error_json(const std::string& type, const std::string& message);

// Tidy CSV exports.
void write_text(const std::string& path, const std::string& content);
std::string functional_fit_csv(const FunctionalFit& fit);
std::string band_csv(const BandResult& band);
std::string influence_csv(const InfluenceArray& influence);
std::string marginal_csv(const std::vector<double>& etas, const std::vector<double>& probs);
std::string sim_report_csv(const SimReport& report);

std::string status_name(RobustnessStatus status);

}  // namespace mnarsens
