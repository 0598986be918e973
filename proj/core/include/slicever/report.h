// Rendering of a ReportBundle: the per-slice metrics table followed by the
// accuracy and average rows, then latency, event and loop summaries.
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "slicever/experiment.h"

namespace slicever::report {

enum class Format : std::uint8_t { kText, kMarkdown, kJson };
std::optional<Format> parse_format(std::string_view s);

// Text and markdown round to 2 decimals; json keeps full precision and
// parses back with experiment::bundle_from_json.
std::string render_report(const experiment::ReportBundle& bundle, Format format);

}  // namespace slicever::report
