#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "salesopt/records.hpp"

namespace salesopt {

struct EventRecord {
  std::uint64_t seq = 0;
  std::string kind;
  Day day = 0;
  Json payload;
};

Json to_json_line(const EventRecord& r);
EventRecord event_from_json(const Json& j);

/// Append-only JSON-lines log of {seq, kind, day, payload}.
class EventLog {
 public:
  /// Opens (creating if needed) and reads the existing records. A torn final line
  /// left by a killed writer is dropped with a warning; any other malformed line throws.
  explicit EventLog(std::filesystem::path path);

  const std::vector<EventRecord>& records() const { return records_; }
  std::uint64_t next_seq() const { return next_seq_; }
  const std::filesystem::path& path() const { return path_; }

  /// Assigns sequence numbers, writes all lines with a single flush, and returns
  /// the stored records.
  std::vector<EventRecord> append(std::vector<EventRecord> batch);
  EventRecord append(std::string kind, Day day, Json payload);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::vector<EventRecord> records_;
  std::uint64_t next_seq_ = 0;
};

/// Reads a log file without opening it for writing.
std::vector<EventRecord> read_event_log(const std::filesystem::path& path);

}  // namespace salesopt
