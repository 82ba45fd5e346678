#include "salesopt/event_log.hpp"

#include <fmt/format.h>

#include "salesopt/errors.hpp"
#include "salesopt/log.hpp"

namespace salesopt {

Json to_json_line(const EventRecord& r) {
  return Json{{"seq", r.seq}, {"kind", r.kind}, {"day", r.day}, {"payload", r.payload}};
}

EventRecord event_from_json(const Json& j) {
  EventRecord r;
  try {
    r.seq = j.at("seq").get<std::uint64_t>();
    r.kind = j.at("kind").get<std::string>();
    r.day = j.at("day").get<Day>();
    r.payload = j.at("payload");
  } catch (const Json::exception& e) {
    throw InvalidArgument(fmt::format("malformed event record: {}", e.what()));
  }
  return r;
}

std::vector<EventRecord> read_event_log(const std::filesystem::path& path) {
  std::vector<EventRecord> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : content.size();
    ++line_no;
    if (line.empty()) continue;
    try {
      EventRecord r = event_from_json(Json::parse(line));
      if (!out.empty() && r.seq <= out.back().seq)
        throw InvalidArgument(fmt::format("{}:{}: sequence number {} is not increasing", path.string(), line_no, r.seq));
      out.push_back(std::move(r));
    } catch (const Json::parse_error& e) {
      if (!terminated) {
        warn("{}:{}: dropping torn final record", path.string(), line_no);
        break;
      }
      throw InvalidArgument(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return out;
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  records_ = read_event_log(path_);
  next_seq_ = records_.empty() ? 1 : records_.back().seq + 1;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  // Rewrite without a torn tail so new records start on a fresh line.
  std::ifstream probe(path_, std::ios::binary | std::ios::ate);
  const auto size = probe ? static_cast<long long>(probe.tellg()) : 0;
  probe.close();
  std::string rewritten;
  for (const auto& r : records_) rewritten += to_json_line(r).dump() + "\n";
  if (static_cast<long long>(rewritten.size()) != size) {
    std::ofstream fix(path_, std::ios::binary | std::ios::trunc);
    fix << rewritten;
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error("io_error", fmt::format("cannot open event log {}", path_.string()));
}

std::vector<EventRecord> EventLog::append(std::vector<EventRecord> batch) {
  std::string buffer;
  for (auto& r : batch) {
    r.seq = next_seq_++;
    buffer += to_json_line(r).dump() + "\n";
  }
  out_ << buffer;
  out_.flush();
  if (!out_) throw Error("io_error", fmt::format("write to {} failed", path_.string()));
  records_.insert(records_.end(), batch.begin(), batch.end());
  return batch;
}

EventRecord EventLog::append(std::string kind, Day day, Json payload) {
  std::vector<EventRecord> one(1);
  one[0].kind = std::move(kind);
  one[0].day = day;
  one[0].payload = std::move(payload);
  return append(std::move(one)).front();
}

}  // namespace salesopt
