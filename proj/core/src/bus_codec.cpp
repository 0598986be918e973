#include "slicever/bus.h"

#include <json.hpp>

namespace slicever::bus {

using Json = nlohmann::ordered_json;

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

[[noreturn]] void missing(std::string_view field) {
  throw DecodeError(DecodeError::Kind::kMissingField, "missing field " + std::string(field));
}

[[noreturn]] void invalid(std::string_view field) {
  throw DecodeError(DecodeError::Kind::kInvalidValue, "invalid value: " + std::string(field));
}

const Json& field(const Json& obj, std::string_view name) {
  auto it = obj.find(name);
  if (it == obj.end()) missing(name);
  return *it;
}

const Json& object_field(const Json& obj, std::string_view name) {
  const Json& v = field(obj, name);
  if (!v.is_object()) invalid(name);
  return v;
}

std::int64_t int_field(const Json& obj, std::string_view name, bool nonnegative = false) {
  const Json& v = field(obj, name);
  if (!v.is_number_integer()) invalid(name);
  const auto value = v.get<std::int64_t>();
  if (nonnegative && value < 0) invalid(name);
  return value;
}

double real_field(const Json& obj, std::string_view name) {
  const Json& v = field(obj, name);
  if (!v.is_number()) invalid(name);
  const double value = v.get<double>();
  if (!std::isfinite(value) || value < 0.0) invalid(name);
  return value;
}

bool bool_field(const Json& obj, std::string_view name) {
  const Json& v = field(obj, name);
  if (!v.is_boolean()) invalid(name);
  return v.get<bool>();
}

std::string string_field(const Json& obj, std::string_view name) {
  const Json& v = field(obj, name);
  if (!v.is_string()) invalid(name);
  return v.get<std::string>();
}

SliceId slice_field(const Json& obj, std::string_view name) {
  auto s = parse_slice(string_field(obj, name));
  if (!s) invalid(name);
  return *s;
}

Json to_json(const KpiReportMsg& m) {
  Json users = Json::array();
  for (const auto& u : m.users) {
    Json entry;
    entry["user_id"] = u.user_id;
    entry["slice"] = slice_name(u.slice);
    entry["tx_bitrate_mbps"] = u.tx_bitrate_mbps;
    entry["tx_packets"] = u.tx_packets;
    entry["dl_buffer_bytes"] = u.dl_buffer_bytes;
    entry["window_id"] = u.window_id;
    users.push_back(std::move(entry));
  }
  Json j;
  j["type"] = "kpi_report";
  j["window_id"] = m.window_id;
  j["action_rejected"] = m.action_rejected;
  j["users"] = std::move(users);
  return j;
}

Json to_json(const ControlMsg& m) {
  Json alloc;
  for (SliceId s : kAllSlices) {
    Json entry;
    entry["prbs"] = m.allocations[s].prbs;
    entry["scheduler"] = scheduler_name(m.allocations[s].scheduler);
    alloc[std::string(slice_name(s))] = std::move(entry);
  }
  Json j;
  j["type"] = "control";
  j["window_id"] = m.window_id;
  j["allocations"] = std::move(alloc);
  return j;
}

Json to_json(const VerdictMsg& m) {
  Json j;
  j["type"] = "verdict";
  j["window_id"] = m.window_id;
  j["user_id"] = m.user_id;
  j["predicted_slice"] = slice_name(m.predicted_slice);
  j["true_slice"] = slice_name(m.true_slice);
  j["flags"] = Json{{"drift", m.flags.drift}, {"misclass", m.flags.misclass}, {"conflict", m.flags.conflict}};
  j["latency_us"] = m.latency_us;
  return j;
}

Json to_json(const EscalationMsg& m) {
  Json j;
  j["type"] = "escalation";
  j["reason"] = m.reason;
  j["window_id"] = m.window_id;
  return j;
}

KpiReportMsg kpi_from_json(const Json& j) {
  KpiReportMsg m;
  m.window_id = int_field(j, "window_id");
  if (auto it = j.find("action_rejected"); it != j.end()) {
    if (!it->is_boolean()) invalid("action_rejected");
    m.action_rejected = it->get<bool>();
  }
  const Json& users = field(j, "users");
  if (!users.is_array()) invalid("users");
  for (const Json& u : users) {
    if (!u.is_object()) invalid("users");
    UserKpi kpi;
    kpi.user_id = int_field(u, "user_id");
    kpi.slice = slice_field(u, "slice");
    kpi.tx_bitrate_mbps = real_field(u, "tx_bitrate_mbps");
    kpi.tx_packets = int_field(u, "tx_packets", true);
    kpi.dl_buffer_bytes = int_field(u, "dl_buffer_bytes", true);
    kpi.window_id = u.contains("window_id") ? int_field(u, "window_id") : m.window_id;
    m.users.push_back(kpi);
  }
  return m;
}

ControlMsg control_from_json(const Json& j) {
  ControlMsg m;
  m.window_id = int_field(j, "window_id");
  const Json& alloc = object_field(j, "allocations");
  for (SliceId s : kAllSlices) {
    const Json& entry = object_field(alloc, slice_name(s));
    const auto prbs = int_field(entry, "prbs", true);
    if (prbs > std::numeric_limits<std::int32_t>::max()) invalid("prbs");
    m.allocations[s].prbs = static_cast<std::int32_t>(prbs);
    auto policy = parse_scheduler(string_field(entry, "scheduler"));
    if (!policy) invalid("scheduler");
    m.allocations[s].scheduler = *policy;
  }
  return m;
}

VerdictMsg verdict_from_json(const Json& j) {
  VerdictMsg m;
  m.window_id = int_field(j, "window_id");
  m.user_id = int_field(j, "user_id");
  m.predicted_slice = slice_field(j, "predicted_slice");
  m.true_slice = slice_field(j, "true_slice");
  const Json& flags = object_field(j, "flags");
  m.flags.drift = bool_field(flags, "drift");
  m.flags.misclass = bool_field(flags, "misclass");
  m.flags.conflict = bool_field(flags, "conflict");
  m.latency_us = int_field(j, "latency_us", true);
  return m;
}

EscalationMsg escalation_from_json(const Json& j) {
  EscalationMsg m;
  m.reason = string_field(j, "reason");
  m.window_id = int_field(j, "window_id");
  return m;
}

}  // namespace

MessageType type_of(const BusMessage& msg) { return static_cast<MessageType>(msg.index()); }

std::string_view type_name(MessageType t) {
  switch (t) {
    case MessageType::kKpiReport:
      return "kpi_report";
    case MessageType::kControl:
      return "control";
    case MessageType::kVerdict:
      return "verdict";
    case MessageType::kEscalation:
      return "escalation";
  }
  return "unknown";
}

std::optional<MessageType> parse_type(std::string_view name) {
  for (auto t : {MessageType::kKpiReport, MessageType::kControl, MessageType::kVerdict,
                 MessageType::kEscalation}) {
    if (type_name(t) == name) return t;
  }
  return std::nullopt;
}

std::string encode_msg(const BusMessage& msg) {
  const Json j = std::visit([](const auto& m) { return to_json(m); }, msg);
  std::string line = j.dump();
  line.push_back('\n');
  return line;
}

BusMessage decode_msg(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DecodeError(DecodeError::Kind::kParse, "parse error");

  const auto type_it = j.find("type");
  if (type_it == j.end()) missing("type");
  if (!type_it->is_string()) throw DecodeError(DecodeError::Kind::kUnknownMessage, "unknown message");
  const auto type = parse_type(type_it->get<std::string>());
  if (!type) throw DecodeError(DecodeError::Kind::kUnknownMessage, "unknown message");

  switch (*type) {
    case MessageType::kKpiReport:
      return kpi_from_json(j);
    case MessageType::kControl:
      return control_from_json(j);
    case MessageType::kVerdict:
      return verdict_from_json(j);
    case MessageType::kEscalation:
      return escalation_from_json(j);
  }
  throw DecodeError(DecodeError::Kind::kUnknownMessage, "unknown message");
}

}  // namespace slicever::bus
