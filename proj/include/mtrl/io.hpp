#pragma once
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "mtrl/core_model.hpp"
#include "mtrl/priors.hpp"

namespace mtrl {

// CSV with header `task,y,x1,...,xd`. Rows may come in any order; tasks are
// numbered by first appearance. Throws ParseError (naming the line), EmptyFile,
// DimensionMismatch, IoError.
MultiTaskDataset parse_csv(std::istream& in);
MultiTaskDataset load_csv(const std::string& path);
void write_csv(const MultiTaskDataset& ds, std::ostream& out);
void write_csv(const MultiTaskDataset& ds, const std::string& path);

inline constexpr int kModelFormatVersion = 1;

// JSON document {format, version, checksum, payload}; the checksum is FNV-1a 64
// over the compact payload dump. Doubles are written in shortest round-trip form.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view text);  // VersionMismatch, CorruptModel
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

std::uint64_t fnv1a64(std::string_view data);

/*
 * Prior-spec file: `key=value` lines, `#` comments.
 *   kind=mean
 *   kind=similarity   matrix=0,1;1,0          (rows separated by ';')
 *   kind=network      edges=0:1,1:2           (0-based task indices)
 *   kind=clustered    clusters=0,0,1  alpha=1  beta=2  gamma=3
 */
struct PriorSpec {
  std::string kind;
  std::map<std::string, std::string> params;
};

PriorSpec parse_prior_spec(std::istream& in);  // ParseError
PriorSpec load_prior_spec(const std::string& path);
FixedInverseCovariance build_prior(const PriorSpec& spec, Index num_tasks);

}  // namespace mtrl
