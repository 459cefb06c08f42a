#ifndef DCE_TRACE_IO_HPP
#define DCE_TRACE_IO_HPP

#include "dce/attacks.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dce {

// JSON-lines trace layout:
//   {"config":{...},"source_label":L,"target_label":L|null}
//   {"iteration":0,"queries":Q,"l2":D,"gamma":..,"theta_hat":..,
//    "kappa_norm":..,"kappa_input":..,"branch":"init"}
//   ... one line per iteration ...
//   {"final":{"l2":D,"queries":Q,"partial":B,"error":S,"x":[...]}}
// Absent optional values are written as null.

std::string config_to_json(const AttackConfig& cfg);

/// Overlays the keys present in `json_text` on `base`. Unknown keys are a
/// SchemaError.
AttackConfig config_from_json(const std::string& json_text,
                              const AttackConfig& base = {});

std::string record_to_json(const IterationRecord& rec);

void write_trace(std::ostream& out, const AttackTrace& trace);
void write_trace(const std::filesystem::path& file, const AttackTrace& trace);

/// Throws SchemaError on malformed lines (reported with their line number).
AttackTrace read_trace(std::istream& in);
AttackTrace read_trace(const std::filesystem::path& file);

}  // namespace dce

#endif  // DCE_TRACE_IO_HPP
