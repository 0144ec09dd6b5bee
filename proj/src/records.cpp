#include "p3dvd/records.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace p3dvd {

namespace {

using nlohmann::ordered_json;

double finite_number(const ordered_json& j, const char* field, const std::string& where) {
  if (!j.is_number()) throw std::invalid_argument(where + ": " + field + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw std::invalid_argument(where + ": " + field + " must be finite");
  return v;
}

}  // namespace

P3DVR AnnotationRecord::to_p3dvr() const {
  P3DVR p;
  p.eb.cx = box.cx;
  p.eb.cy = box.cy;
  p.eb.w = box.w;
  p.eb.h = box.h;
  p.eb.r = r;
  p.eb.pose = {pose};
  p.spl.present = spl_present;
  p.spl.theta_deg = 90.0 * theta_n;
  p.spl.pwc_x = pwc.x;
  p.spl.pwc_y = pwc.y;
  return p;
}

AnnotationRecord AnnotationRecord::from_p3dvr(const std::string& image_id, const P3DVR& p) {
  AnnotationRecord rec;
  rec.image_id = image_id;
  rec.box = p.eb.box();
  rec.r = p.eb.r;
  rec.pose = p.eb.pose.value;
  rec.spl_present = p.spl.present;
  rec.theta_n = p.spl.theta_deg / 90.0;
  rec.pwc = {p.spl.pwc_x, p.spl.pwc_y};
  return rec;
}

AnnotationRecord parse_annotation(const std::string& line, const std::string& path,
                                  std::size_t line_no) {
  const std::string where = path + ":" + std::to_string(line_no);
  ordered_json doc;
  try {
    doc = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(where + ": invalid JSON (" + e.what() + ")");
  }
  if (!doc.is_object()) throw std::invalid_argument(where + ": expected a JSON object");

  AnnotationRecord rec;
  try {
    rec.image_id = doc.at("image_id").get<std::string>();
    const auto& bbox = doc.at("bbox");
    if (!bbox.is_array() || bbox.size() != 4)
      throw std::invalid_argument(where + ": bbox must be [cx, cy, w, h]");
    rec.box.cx = finite_number(bbox[0], "bbox[0]", where);
    rec.box.cy = finite_number(bbox[1], "bbox[1]", where);
    rec.box.w = finite_number(bbox[2], "bbox[2]", where);
    rec.box.h = finite_number(bbox[3], "bbox[3]", where);
    rec.r = finite_number(doc.at("r"), "r", where);
    rec.pose = doc.at("pose").get<int>();
    if (rec.pose < 0 || rec.pose > 7)
      throw std::invalid_argument(where + ": pose must be in [0, 7]");
    const auto& spl = doc.at("spl");
    rec.spl_present = spl.at("present").get<bool>();
    rec.theta_n = finite_number(spl.at("theta_n"), "spl.theta_n", where);
    if (rec.theta_n < -1.0 || rec.theta_n > 1.0)
      throw std::invalid_argument(where + ": spl.theta_n must be in [-1, 1]");
    const auto& pwc = spl.at("pwc");
    if (!pwc.is_array() || pwc.size() != 2)
      throw std::invalid_argument(where + ": spl.pwc must be [x, y]");
    rec.pwc.x = finite_number(pwc[0], "spl.pwc[0]", where);
    rec.pwc.y = finite_number(pwc[1], "spl.pwc[1]", where);
    if (doc.contains("score")) rec.score = finite_number(doc["score"], "score", where);
    if (doc.contains("spl_conf"))
      rec.spl_conf = finite_number(doc["spl_conf"], "spl_conf", where);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(where + ": " + e.what());
  }
  rec.extra = std::move(doc);
  return rec;
}

std::string serialize_annotation(const AnnotationRecord& rec) {
  ordered_json doc = rec.extra.is_object() ? rec.extra : ordered_json::object();
  doc["image_id"] = rec.image_id;
  doc["bbox"] = {rec.box.cx, rec.box.cy, rec.box.w, rec.box.h};
  doc["r"] = rec.r;
  doc["pose"] = rec.pose;
  doc["spl"] = {{"present", rec.spl_present},
                {"theta_n", rec.theta_n},
                {"pwc", {rec.pwc.x, rec.pwc.y}}};
  if (rec.score) doc["score"] = *rec.score;
  if (rec.spl_conf) doc["spl_conf"] = *rec.spl_conf;
  return doc.dump();
}

std::vector<AnnotationRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_annotation(line, path, line_no));
  }
  return out;
}

void write_jsonl(const std::vector<AnnotationRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const AnnotationRecord& rec : records) out << serialize_annotation(rec) << "\n";
}

}  // namespace p3dvd
