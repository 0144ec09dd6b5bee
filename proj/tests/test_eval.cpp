#include "p3dvd/eval.hpp"

#include <cmath>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "p3dvd/rng.hpp"

using namespace p3dvd;

namespace {

AnnotationRecord make_gt(const std::string& image_id, Box box, double r, int pose,
                         bool spl, double theta_n = 0.0, Vec2 pwc = {0, 0}) {
  AnnotationRecord rec;
  rec.image_id = image_id;
  rec.box = box;
  rec.r = r;
  rec.pose = pose;
  rec.spl_present = spl;
  rec.theta_n = theta_n;
  rec.pwc = pwc;
  return rec;
}

AnnotationRecord make_pred(const AnnotationRecord& like, double score) {
  AnnotationRecord rec = like;
  rec.score = score;
  rec.spl_conf = 0.9;
  return rec;
}

std::vector<AnnotationRecord> load_fixture_records(const nlohmann::json& arr) {
  std::vector<AnnotationRecord> out;
  for (const auto& j : arr)
    out.push_back(parse_annotation(j.dump(), "fixture", out.size() + 1));
  return out;
}

// random instance on one image; gt boxes on a loose grid so overlaps vary
void random_instance(Rng& rng, int max_gt, int max_pred,
                     std::vector<AnnotationRecord>* gts,
                     std::vector<AnnotationRecord>* preds) {
  const int n_gt = static_cast<int>(rng.uniform_int(0, max_gt));
  const int n_pred = static_cast<int>(rng.uniform_int(0, max_pred));
  for (int g = 0; g < n_gt; ++g) {
    gts->push_back(make_gt(
        "im", {rng.uniform(0, 300), rng.uniform(0, 300), rng.uniform(10, 80), rng.uniform(10, 80)},
        rng.uniform(0.0, 1.0), static_cast<int>(rng.uniform_int(0, 7)), rng.bernoulli(0.6),
        rng.uniform(-1.0, 1.0), {rng.uniform(0, 300), rng.uniform(0, 300)}));
  }
  for (int p = 0; p < n_pred; ++p) {
    AnnotationRecord rec;
    if (!gts->empty() && rng.bernoulli(0.7)) {
      rec = (*gts)[rng.uniform_int(0, static_cast<int>(gts->size()) - 1)];
      rec.box.cx += rng.uniform(-10, 10);
      rec.box.cy += rng.uniform(-10, 10);
      rec.box.w = std::max(4.0, rec.box.w + rng.uniform(-8, 8));
      rec.box.h = std::max(4.0, rec.box.h + rng.uniform(-8, 8));
      rec.r = std::clamp(rec.r + rng.uniform(-0.1, 0.1), 0.0, 1.0);
      if (rng.bernoulli(0.2)) rec.pose = static_cast<int>(rng.uniform_int(0, 7));
      rec.theta_n = std::clamp(rec.theta_n + rng.uniform(-0.1, 0.1), -1.0, 1.0);
      rec.pwc.x += rng.uniform(-8, 8);
      rec.pwc.y += rng.uniform(-8, 8);
    } else {
      rec = make_gt("im", {rng.uniform(0, 300), rng.uniform(0, 300), rng.uniform(10, 80),
                           rng.uniform(10, 80)},
                    rng.uniform(0.0, 1.0), static_cast<int>(rng.uniform_int(0, 7)), false,
                    rng.uniform(-1.0, 1.0), {rng.uniform(0, 300), rng.uniform(0, 300)});
    }
    rec.score = rng.uniform(0.1, 1.0);
    preds->push_back(rec);
  }
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("threshold schedule defaults") {
  const ThresholdSchedule s = ThresholdSchedule::defaults();
  REQUIRE(s.lambdas.size() == 10);
  CHECK(s.lambdas.front() == 0.5);
  CHECK(s.lambdas.back() == 0.95);
  CHECK(s.lambda_b.front() == 0.02);
  CHECK(s.lambda_b.back() == 0.2);
  CHECK(s.lambda_r.back() == 0.1);
  CHECK(s.lambda_p.front() == 2.0);
  CHECK(s.lambda_p.back() == 20.0);
}

TEST_CASE("match_pairs basics") {
  const AnnotationRecord gt = make_gt("im", {5, 5, 10, 10}, 0.5, 1, true);
  SUBCASE("identical pair") {
    const MatchSet ms = match_pairs({gt}, {make_pred(gt, 0.9)}, 0.5);
    REQUIRE(ms.n_t() == 1);
    CHECK(ms.pairs[0].iou == doctest::Approx(1.0));
    CHECK(ms.n_t_prime() == 1);
  }
  SUBCASE("greedy by score, not by IoU") {
    AnnotationRecord near = gt;  // IoU ~0.9
    near.box.cx += 10.0 / 19.0;
    AnnotationRecord nearer = gt;  // IoU ~0.95
    nearer.box.cx += 10.0 * 0.05 / 1.95;
    const MatchSet ms =
        match_pairs({gt}, {make_pred(near, 0.8), make_pred(nearer, 0.7)}, 0.5);
    REQUIRE(ms.n_t() == 1);
    CHECK(ms.pairs[0].pred_index == 0);  // the score-0.8 prediction took it
    CHECK(ms.pairs[0].iou == doctest::Approx(0.9).epsilon(1e-9));
  }
  SUBCASE("disjoint sets") {
    AnnotationRecord far = gt;
    far.box.cx += 1000.0;
    CHECK(match_pairs({gt}, {make_pred(far, 0.9)}, 0.5).n_t() == 0);
    CHECK(match_pairs({}, {}, 0.5).n_t() == 0);
  }
}

TEST_CASE("attribute boundary semantics are inclusive") {
  ThresholdSchedule s = ThresholdSchedule::defaults();
  AnnotationRecord gt = make_gt("im", {5, 5, 10, 10}, 0.0, 1, true);
  AnnotationRecord pred = make_pred(gt, 0.9);
  pred.r = 0.05;  // |dr| is bit-identical to the 5th threshold
  const MatchSet ms = match_pairs({gt}, {pred}, 0.5);
  const AttributePrecisions ap = attribute_precisions(ms, s);
  REQUIRE(ap.arp.size() == 10);
  CHECK(*ap.arp[3] == 0.0);  // 0.04
  CHECK(*ap.arp[4] == 1.0);  // 0.05 inclusive
}

TEST_CASE("undefined metrics are distinct from zero") {
  ThresholdSchedule s = ThresholdSchedule::defaults();
  SUBCASE("empty match set leaves everything undefined") {
    const AttributePrecisions ap = attribute_precisions(MatchSet{}, s);
    CHECK(!ap.pp.has_value());
    CHECK(!ap.abp[0].has_value());
    CHECK(!ap.aap[0].has_value());
  }
  SUBCASE("no SPL gts leaves only the SPL family undefined") {
    const AnnotationRecord gt = make_gt("im", {5, 5, 10, 10}, 0.5, 1, false);
    const MatchSet ms = match_pairs({gt}, {make_pred(gt, 0.9)}, 0.5);
    const AttributePrecisions ap = attribute_precisions(ms, s);
    CHECK(ap.pp.has_value());
    CHECK(ap.abp[0].has_value());
    CHECK(!ap.aap[0].has_value());
    CHECK(!ap.app[0].has_value());
  }
}

TEST_CASE("area buckets follow the interval notation") {
  CHECK(area_in_bucket(1024.0, AreaBucket::Small));
  CHECK(!area_in_bucket(1025.0, AreaBucket::Small));
  CHECK(area_in_bucket(1025.0, AreaBucket::Medium));
  CHECK(area_in_bucket(9216.0, AreaBucket::Medium));
  CHECK(!area_in_bucket(9216.0, AreaBucket::Large));
  CHECK(area_in_bucket(9217.0, AreaBucket::Large));
}

TEST_CASE("score is the seven-metric mean, matching the published rows") {
  CHECK(score({53.49, 69.15, 77.09, 82.88, 69.35, 37.55, 40.67}) ==
        doctest::Approx(61.46).epsilon(0.0004));
  CHECK(score({28.67, 61.16, 55.88, 68.18, 40.84, 1.87, 2.09}) ==
        doctest::Approx(36.96).epsilon(0.0004));
  CHECK(score({5, 5, 5, 5, 5, 5, 5}) == doctest::Approx(5.0));
}

TEST_CASE("coco ap/ar toy cases") {
  SUBCASE("perfect predictions") {
    std::vector<AnnotationRecord> gts, preds;
    for (int i = 0; i < 5; ++i) {
      gts.push_back(make_gt("im", {50.0 + 100.0 * i, 50, 30, 30}, 0.5, 1, true));
      preds.push_back(make_pred(gts.back(), 0.9));
    }
    const ApAr res = coco_ap_ar(gts, preds, ThresholdSchedule::defaults().lambdas,
                                AreaBucket::All);
    CHECK(*res.ap == doctest::Approx(1.0));
    CHECK(*res.ar == doctest::Approx(1.0));
  }
  SUBCASE("2 gt / 3 pred interpolated staircase") {
    // P1 exact on G1 (score .9), P2 a false positive (.8), P3 exact on G2 (.7)
    std::vector<AnnotationRecord> gts{make_gt("im", {50, 50, 20, 20}, 0.5, 1, true),
                                      make_gt("im", {150, 50, 20, 20}, 0.5, 1, true)};
    std::vector<AnnotationRecord> preds{
        make_pred(gts[0], 0.9),
        make_pred(make_gt("im", {400, 50, 20, 20}, 0.5, 1, false), 0.8),
        make_pred(gts[1], 0.7)};
    const ApAr res = coco_ap_ar(gts, preds, {0.5}, AreaBucket::All);
    // precision/recall: (1, .5), (.5, .5), (2/3, 1); envelope 1, 2/3, 2/3
    // 51 grid points at precision 1, 50 at 2/3
    CHECK(*res.ap == doctest::Approx((51.0 + 50.0 * 2.0 / 3.0) / 101.0).epsilon(1e-12));
    CHECK(*res.ar == doctest::Approx(1.0));
  }
  SUBCASE("empty gt bucket is undefined") {
    std::vector<AnnotationRecord> gts{make_gt("im", {50, 50, 20, 20}, 0.5, 1, true)};
    const ApAr res =
        coco_ap_ar(gts, {make_pred(gts[0], 0.9)}, {0.5}, AreaBucket::Large);
    CHECK(!res.ap.has_value());
    CHECK(!res.ar.has_value());
  }
}

TEST_CASE("evaluate on identical files yields 100 everywhere") {
  std::vector<AnnotationRecord> gts, preds;
  Rng rng(71);
  for (int i = 0; i < 12; ++i) {
    // spread areas over the buckets
    const double size = 10.0 + 30.0 * i;
    gts.push_back(make_gt("im" + std::to_string(i % 3),
                          {rng.uniform(100, 3000), rng.uniform(100, 1500), size, size},
                          rng.uniform(0, 1), static_cast<int>(rng.uniform_int(0, 7)), true,
                          rng.uniform(-1, 1), {rng.uniform(0, 3000), rng.uniform(0, 1500)}));
    preds.push_back(make_pred(gts.back(), rng.uniform(0.5, 1.0)));
  }
  const MetricReport report = evaluate(gts, preds);
  for (const BucketReport& br : report.buckets) {
    CHECK(*br.headline.abp == doctest::Approx(100.0));
    CHECK(*br.headline.arp == doctest::Approx(100.0));
    CHECK(*br.headline.pp == doctest::Approx(100.0));
    CHECK(*br.headline.aap == doctest::Approx(100.0));
    CHECK(*br.headline.app == doctest::Approx(100.0));
    CHECK(*br.headline.ap == doctest::Approx(100.0));
    CHECK(*br.headline.ar == doctest::Approx(100.0));
    CHECK(*br.headline.score() == doctest::Approx(100.0));
  }
}

TEST_CASE("metrics are permutation-invariant") {
  Rng rng(72);
  std::vector<AnnotationRecord> gts, preds;
  random_instance(rng, 10, 15, &gts, &preds);
  const MetricReport a = evaluate(gts, preds);
  std::reverse(gts.begin(), gts.end());
  std::reverse(preds.begin(), preds.end());
  const MetricReport b = evaluate(gts, preds);
  for (int i = 0; i < 4; ++i) {
    CHECK(a.buckets[i].headline.abp == b.buckets[i].headline.abp);
    CHECK(a.buckets[i].headline.ap == b.buckets[i].headline.ap);
    CHECK(a.buckets[i].headline.score() == b.buckets[i].headline.score());
  }
}

TEST_CASE("attribute_precisions agrees exactly with the brute-force oracle") {
  const ThresholdSchedule schedule = ThresholdSchedule::defaults();
  Rng rng(73);
  for (int instance = 0; instance < 100; ++instance) {
    std::vector<AnnotationRecord> gts, preds;
    random_instance(rng, 10, 15, &gts, &preds);
    for (double lambda : schedule.lambdas) {
      const MatchSet ms = match_pairs(gts, preds, lambda);
      const AttributePrecisions mine = attribute_precisions(ms, schedule);
      const oracles::BruteMetrics brute =
          oracles::brute_attribute_precisions(gts, preds, lambda, schedule);
      for (int i = 0; i < 10; ++i) {
        CHECK(mine.abp[i] == brute.abp[i]);
        CHECK(mine.arp[i] == brute.arp[i]);
        CHECK(mine.aap[i] == brute.aap[i]);
        CHECK(mine.app[i] == brute.app[i]);
      }
      CHECK(mine.pp == brute.pp);
    }
  }
}

TEST_CASE("committed fixture reproduces its stored values") {
  std::ifstream in(std::string(TESTS_DATA_DIR) + "/eval_fixture.json");
  REQUIRE(in.good());
  nlohmann::json doc;
  in >> doc;
  const auto gts = load_fixture_records(doc.at("gts"));
  const auto preds = load_fixture_records(doc.at("preds"));
  const MetricReport report = evaluate(gts, preds);
  const BucketReport& all = report.bucket(AreaBucket::All);
  const auto& expected = doc.at("expected_all");
  CHECK(*all.headline.abp == doctest::Approx(expected.at("abp").get<double>()).epsilon(1e-12));
  CHECK(*all.headline.arp == doctest::Approx(expected.at("arp").get<double>()).epsilon(1e-12));
  CHECK(*all.headline.pp == doctest::Approx(expected.at("pp").get<double>()).epsilon(1e-12));
  CHECK(*all.headline.aap == doctest::Approx(expected.at("aap").get<double>()).epsilon(1e-12));
  CHECK(*all.headline.app == doctest::Approx(expected.at("app").get<double>()).epsilon(1e-12));
  CHECK(*all.headline.ap == doctest::Approx(expected.at("ap").get<double>()).epsilon(1e-12));
  CHECK(*all.headline.ar == doctest::Approx(expected.at("ar").get<double>()).epsilon(1e-12));

  // every fixture gt is small; the small bucket mirrors "all", the others
  // stay undefined
  const BucketReport& small = report.bucket(AreaBucket::Small);
  CHECK(*small.headline.abp == *all.headline.abp);
  CHECK(!report.bucket(AreaBucket::Medium).headline.pp.has_value());
  CHECK(!report.bucket(AreaBucket::Large).headline.score().has_value());

  // table output carries the published column order and dashes for undefined
  const std::string table = report_to_table(report);
  CHECK(table.find("Area") != std::string::npos);
  CHECK(table.find("-") != std::string::npos);
}

TEST_CASE("abp reaches 100 at the loose-threshold limit") {
  ThresholdSchedule s = ThresholdSchedule::defaults();
  s.lambda_b = {1.0};  // 1 - IoU <= 1 holds for every matched pair
  Rng rng(75);
  std::vector<AnnotationRecord> gts, preds;
  random_instance(rng, 8, 12, &gts, &preds);
  const MatchSet ms = match_pairs(gts, preds, 0.5);
  if (ms.n_t() > 0) {
    const AttributePrecisions ap = attribute_precisions(ms, s);
    CHECK(*ap.abp[0] == 1.0);
  }
}

TEST_CASE("monotonicity in the attribute threshold") {
  Rng rng(74);
  const ThresholdSchedule schedule = ThresholdSchedule::defaults();
  for (int instance = 0; instance < 20; ++instance) {
    std::vector<AnnotationRecord> gts, preds;
    random_instance(rng, 8, 12, &gts, &preds);
    const MatchSet ms = match_pairs(gts, preds, 0.5);
    const AttributePrecisions ap = attribute_precisions(ms, schedule);
    for (int i = 1; i < 10; ++i) {
      if (ap.abp[i - 1] && ap.abp[i]) CHECK(*ap.abp[i] >= *ap.abp[i - 1]);
      if (ap.arp[i - 1] && ap.arp[i]) CHECK(*ap.arp[i] >= *ap.arp[i - 1]);
      if (ap.aap[i - 1] && ap.aap[i]) CHECK(*ap.aap[i] >= *ap.aap[i - 1]);
      if (ap.app[i - 1] && ap.app[i]) CHECK(*ap.app[i] >= *ap.app[i - 1]);
    }
  }
}

}  // TEST_SUITE
