#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace adrive {

// Newline-delimited structured event records (detections, mode switches,
// decisions, resolutions). Streamed, kept in memory, or both.
class EventLog {
 public:
  void set_stream(std::ostream* out) { stream_ = out; }
  void keep_in_memory(bool keep) { keep_ = keep; }

  void record(double t, const std::string& type, nlohmann::json fields) {
    fields["t"] = t;
    fields["event"] = type;
    if (stream_) *stream_ << fields.dump() << '\n';
    if (keep_) records_.push_back(std::move(fields));
  }

  const std::vector<nlohmann::json>& records() const { return records_; }

  std::vector<nlohmann::json> of_type(const std::string& type) const {
    std::vector<nlohmann::json> out;
    for (const auto& r : records_)
      if (r.at("event") == type) out.push_back(r);
    return out;
  }

 private:
  std::ostream* stream_ = nullptr;
  bool keep_ = true;
  std::vector<nlohmann::json> records_;
};

}  // namespace adrive
