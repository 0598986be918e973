// Typed bus messages and their canonical newline-delimited JSON encoding.
//
// Key order on the wire is fixed (see schemas/bus_message.schema.json):
//   kpi_report: type, window_id, action_rejected, users[{user_id, slice,
//               tx_bitrate_mbps, tx_packets, dl_buffer_bytes, window_id}]
//   control:    type, window_id, allocations{embb, mmtc, urllc}{prbs, scheduler}
//   verdict:    type, window_id, user_id, predicted_slice, true_slice,
//               flags{drift, misclass, conflict}, latency_us
//   escalation: type, reason, window_id
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "slicever/domain.h"

namespace slicever::bus {

struct KpiReportMsg {
  std::int64_t window_id = 0;
  bool action_rejected = false;
  std::vector<UserKpi> users;

  bool operator==(const KpiReportMsg&) const = default;
};

struct ControlMsg {
  std::int64_t window_id = 0;
  SlicingAction allocations;

  bool operator==(const ControlMsg&) const = default;
};

struct VerdictFlags {
  bool drift = false;
  bool misclass = false;
  bool conflict = false;

  bool operator==(const VerdictFlags&) const = default;
};

struct VerdictMsg {
  std::int64_t window_id = 0;
  std::int64_t user_id = 0;
  SliceId predicted_slice = SliceId::kEmbb;
  SliceId true_slice = SliceId::kEmbb;
  VerdictFlags flags;
  std::int64_t latency_us = 0;

  bool operator==(const VerdictMsg&) const = default;
};

struct EscalationMsg {
  std::string reason;
  std::int64_t window_id = 0;

  bool operator==(const EscalationMsg&) const = default;
};

using BusMessage = std::variant<KpiReportMsg, ControlMsg, VerdictMsg, EscalationMsg>;

enum class MessageType : std::uint8_t { kKpiReport, kControl, kVerdict, kEscalation };

MessageType type_of(const BusMessage& msg);
std::string_view type_name(MessageType t);  // "kpi_report", "control", ...
std::optional<MessageType> parse_type(std::string_view name);

class DecodeError : public Error {
 public:
  enum class Kind { kParse, kUnknownMessage, kMissingField, kInvalidValue };
  DecodeError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// One JSON object terminated by '\n'. Equal messages encode to equal bytes.
std::string encode_msg(const BusMessage& msg);

// Parses a single line (trailing newline optional). Unknown fields are ignored.
BusMessage decode_msg(std::string_view line);

}  // namespace slicever::bus
