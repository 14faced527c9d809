#pragma once
#include <map>
#include <string>
#include <vector>

#include "lanp/model.hpp"

namespace lanp {

// signals.csv: header "unit_id,x,y"; labels.csv: header "unit_id,label" with
// 0-based integer labels. Floats carry 17 significant digits so a
// generate -> load -> re-export cycle is byte-identical. The loader sorts by
// (unit_id, x), so input row order is irrelevant.

std::string format_double(double v); // %.17g

void write_signals_csv(const std::string& path, std::span<const Signal> signals);
void write_labels_csv(const std::string& path, std::span<const Signal> signals);

// Load signals, attaching labels from labels_path when non-empty. Schema
// violations report the offending row number.
std::vector<Signal> load_signals_csv(const std::string& signals_path,
                                     const std::string& labels_path = {});

} // namespace lanp
