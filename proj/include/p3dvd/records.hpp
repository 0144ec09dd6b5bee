#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "p3dvd/p3dvr.hpp"

namespace p3dvd {

// One JSONL annotation line. Angles travel as the network-normalized
// theta_n in [-1, 1] (theta_deg = 90 * theta_n). Unknown fields are kept in
// `extra` and survive a parse -> serialize round-trip.
struct AnnotationRecord {
  std::string image_id;
  Box box;
  double r = 0.0;
  int pose = 0;
  bool spl_present = false;
  double theta_n = 0.0;
  Vec2 pwc;
  std::optional<double> score;     // predictions only
  std::optional<double> spl_conf;  // predictions only
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  P3DVR to_p3dvr() const;
  static AnnotationRecord from_p3dvr(const std::string& image_id, const P3DVR& p);
};

// Throws std::runtime_error with "<path>:<line>: <reason>" on malformed input.
AnnotationRecord parse_annotation(const std::string& line, const std::string& path,
                                  std::size_t line_no);

std::string serialize_annotation(const AnnotationRecord& rec);

std::vector<AnnotationRecord> read_jsonl(const std::string& path);
void write_jsonl(const std::vector<AnnotationRecord>& records, const std::string& path);

}  // namespace p3dvd
