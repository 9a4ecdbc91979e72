#include "ctscan/segmentation.hpp"
#include "ctscan/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace ctscan;

namespace {

Mask with_area(int rows, int cols, long area) {
    Mask m(rows, cols);
    for (long k = 0; k < area; ++k) m.set(int(k / cols), int(k % cols), true);
    return m;
}

Mask rect(int rows, int cols, int y0, int x0, int y1, int x1) {
    Mask m(rows, cols);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) m.set(y, x, true);
    }
    return m;
}

// Crop value v in [0,1] at pixel (0,0) embeds to (v, sqrt(1 - v^2)); against text (1, 0) the score is v.
class ScoreEmbedder final : public EmbedderBackend {
public:
    EmbeddingVec embed_image(const ImageArray<double>& image) const override {
        const double v = image(0, 0);
        return (EmbeddingVec(2) << v, std::sqrt(1 - v * v)).finished();
    }
    EmbeddingVec embed_text(const std::string&) const override { return (EmbeddingVec(2) << 1, 0).finished(); }
    int dimension() const override { return 2; }
};

Crop score_crop(std::size_t source, double score) { return {source, ImageArray<double>::Constant(1, 1, score)}; }

}  // namespace

TEST_CASE("area filter") {
    const int rows = 20, cols = 50;  // area 1000
    const std::vector<Mask> masks{with_area(rows, cols, 10), with_area(rows, cols, 500), with_area(rows, cols, 900),
                                  with_area(rows, cols, 901)};
    SUBCASE("tau 0.05 drops the small and the background-sized mask") {
        const std::vector<Mask> m{masks[0], masks[1], masks[3]};
        CHECK(filter_mask_indices(m, 0.05, 1000) == std::vector<std::size_t>{1});
    }
    SUBCASE("area exactly 0.9 A survives the background cut") {
        CHECK(filter_mask_indices(masks, 0.05, 1000) == std::vector<std::size_t>{1, 2});
    }
    SUBCASE("area exactly tau A is dropped") {
        CHECK(filter_mask_indices(masks, 0.01, 1000) == std::vector<std::size_t>{1, 2});
        CHECK(filter_mask_indices(masks, 0.0099, 1000) == std::vector<std::size_t>{0, 1, 2});
    }
    SUBCASE("tau 0 drops only empties and background") {
        const std::vector<Mask> with_empty{Mask(rows, cols), with_area(rows, cols, 1), with_area(rows, cols, 999)};
        CHECK(filter_mask_indices(with_empty, 0.0, 1000) == std::vector<std::size_t>{1});
    }
    SUBCASE("empty input") { CHECK(filter_masks({}, 0.02, 1000).empty()); }
}

TEST_CASE("crop_with_mask") {
    const SliceImage ones(ImageArray<double>::Ones(8, 9));
    SUBCASE("full mask leaves the image unchanged") {
        const SliceImage img(ImageArray<double>::Random(6, 7).abs());
        const auto crop = crop_with_mask(img, Mask(BitArray::Constant(6, 7, true)));
        CHECK((crop == img.pixels).all());
    }
    SUBCASE("rows 2-4, cols 3-6 of a constant image") {
        const auto crop = crop_with_mask(ones, rect(8, 9, 2, 3, 4, 6));
        CHECK(crop.rows() == 3);
        CHECK(crop.cols() == 4);
        CHECK((crop == 1.0).all());
    }
    SUBCASE("zero image gives a zero crop of box size") {
        const SliceImage zero(ImageArray<double>::Zero(8, 9));
        Mask m(8, 9);
        m.set(1, 1, true);
        m.set(5, 7, true);
        const auto crop = crop_with_mask(zero, m);
        CHECK(crop.rows() == 5);
        CHECK(crop.cols() == 7);
        CHECK((crop == 0.0).all());
    }
    SUBCASE("pixels outside the mask but inside the box are zeroed") {
        Mask m(8, 9);
        m.set(0, 0, true);
        m.set(2, 2, true);
        const auto crop = crop_with_mask(ones, m);
        CHECK(crop.sum() == 2.0);
    }
    CHECK_THROWS_AS(crop_with_mask(ones, Mask(8, 9)), EmptyMask);
}

TEST_CASE("cosine similarity") {
    const Eigen::Vector2d a(3, 4), x(1, 0), y(0, 1), d(1, 1);
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
    CHECK(cosine_similarity(x, y) == 0.0);
    CHECK(cosine_similarity(d, x) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(cosine_similarity(Eigen::Vector2f(1, 1), Eigen::Vector2f(1, 0)) == doctest::Approx(0.70710678f));
    CHECK_THROWS_AS(cosine_similarity(Eigen::Vector2d::Zero(), x), DegenerateEmbedding);
}

TEST_CASE("select_roi") {
    ScoreEmbedder e;
    const EmbeddingVec text = e.embed_text("");
    SUBCASE("single crop") { CHECK(select_roi({score_crop(4, 0.3)}, e, text).position == 0); }
    SUBCASE("0.2 vs 0.9") {
        const auto r = select_roi({score_crop(0, 0.2), score_crop(1, 0.9)}, e, text);
        CHECK(r.position == 1);
        CHECK(r.source_index == 1);
        CHECK(r.score == doctest::Approx(0.9));
    }
    SUBCASE("tie goes to the lower index") {
        CHECK(select_roi({score_crop(7, 0.5), score_crop(8, 0.5)}, e, text).position == 0);
    }
    CHECK_THROWS_AS(select_roi({}, e, text), NoCandidates);
}

TEST_CASE("compute_bbox") {
    Mask two(10, 10);
    two.set(3, 2, true);
    two.set(7, 5, true);
    CHECK(compute_bbox(two) == BoundingBox{2, 3, 5, 7});
    Mask one(10, 10);
    one.set(4, 4, true);
    CHECK(compute_bbox(one) == BoundingBox{4, 4, 4, 4});
    CHECK_THROWS_AS(compute_bbox(Mask(3, 3)), EmptyMask);
}

namespace {

struct PhantomFixture {
    synthetic::Phantom ph = synthetic::make_phantom({});
    FakeSegmenter seg;
    FakeEmbedder emb;
    PhantomFixture() {
        synthetic::SyntheticScan scan;
        scan.phantoms.push_back(ph);
        scan.volume.slices.push_back(ph.image);
        synthetic::configure_fakes({scan}, seg, emb);
    }
};

}  // namespace

TEST_CASE("phantom: per-lung pipeline returns both lungs and drops the blob") {
    PhantomFixture f;
    const SlicePipeline pipeline(f.seg, f.emb, PipelineConfig{});
    const SliceSegmentation out = pipeline.run(f.ph.image);
    CHECK(out.mask == f.ph.lungs());
    CHECK_FALSE((out.mask.bits() && f.ph.blob.bits()).any());
    REQUIRE(out.rois.size() == 2);
    CHECK(out.rois[0].source_index == 1);  // right lung part
    CHECK(out.rois[1].source_index == 4);  // left lung part
}

TEST_CASE("single-target mode with one candidate chains through its box") {
    const synthetic::Phantom ph = synthetic::make_phantom({});
    FakeSegmenter seg;
    seg.configure(ph.image.pixels, {ph.background, ph.right_lung});
    FakeEmbedder emb;
    PipelineConfig cfg;
    cfg.roi_mode = RoiMode::Single;
    const Mask m = segment_slice(ph.image, seg, emb, cfg);
    CHECK(m == seg.segment_with_box(ph.image, compute_bbox(ph.right_lung)));
    CHECK(m == ph.right_lung);
}

TEST_CASE("per-lung mode with a single candidate uses it once") {
    const synthetic::Phantom ph = synthetic::make_phantom({});
    FakeSegmenter seg;
    seg.configure(ph.image.pixels, {ph.right_lung});
    FakeEmbedder emb;
    const SliceSegmentation out = SlicePipeline(seg, emb, PipelineConfig{}).run(ph.image);
    CHECK(out.rois.size() == 1);
    CHECK(out.mask == ph.right_lung);
}

TEST_CASE("all-background slice has no candidates") {
    const synthetic::Phantom ph = synthetic::make_phantom({});
    FakeSegmenter seg;
    seg.configure(ph.image.pixels, {ph.background, ph.speck});
    FakeEmbedder emb;
    CHECK_THROWS_AS(segment_slice(ph.image, seg, emb, PipelineConfig{}), NoCandidates);
}

TEST_CASE("segment_volume") {
    const auto scan = synthetic::make_scan("v", 3, Label::Covid, 48, 48, 5);
    FakeSegmenter seg;
    FakeEmbedder emb;
    synthetic::configure_fakes({scan}, seg, emb);
    const SlicePipeline pipeline(seg, emb, PipelineConfig{});

    SUBCASE("well-formed volume") {
        const auto out = segment_volume(scan.volume, pipeline, 1);
        REQUIRE(out.masks.size() == 3);
        CHECK(out.flagged() == 0);
        const auto lungs = scan.lung_masks();
        for (int i = 0; i < 3; ++i) CHECK(out.masks[std::size_t(i)] == lungs[std::size_t(i)]);
        const auto again = segment_volume(scan.volume, pipeline, 3);
        for (int i = 0; i < 3; ++i) CHECK(again.masks[std::size_t(i)] == out.masks[std::size_t(i)]);
        CHECK(again.status[1].roi_scores == out.status[1].roi_scores);
    }
    SUBCASE("one degenerate slice is zeroed and flagged") {
        const auto& bad = scan.phantoms[1];
        seg.configure(bad.image.pixels, {bad.background});
        const auto out = segment_volume(scan.volume, pipeline, 2);
        CHECK(out.flagged() == 1);
        CHECK(out.status[1].code == SliceStatusCode::NoCandidates);
        CHECK(out.masks[1].empty());
        CHECK(out.masks[0] == scan.phantoms[0].lungs());
    }
    SUBCASE("unconfigured slice is a hard failure naming the slice") {
        ScanVolume v = scan.volume;
        v.slices[2].pixels(0, 0) = 0.123;
        try {
            segment_volume(v, pipeline, 2);
            FAIL("expected SliceError");
        } catch (const SliceError& e) {
            CHECK(e.index() == 2);
        }
    }
}

TEST_CASE("write_volume_segmentation lays out masks and a status table") {
    testing::TempDir dir("segout");
    VolumeSegmentation r{"scanA", {Mask(4, 4), Mask(4, 4)}, {{0, SliceStatusCode::Ok, {0.5, 0.25}}, {1, SliceStatusCode::NoCandidates, {}}}};
    write_volume_segmentation(r, dir.path());
    CHECK(std::filesystem::exists(dir / "scanA/0.mask.png"));
    CHECK(std::filesystem::exists(dir / "scanA/1.mask.png"));
    CHECK(testing::slurp(dir / "scanA/status.tsv") ==
          "index\tstatus\troi_scores\n0\tok\t0.500000,0.250000\n1\tno_candidates\t-\n");
}

TEST_CASE("pipeline config validation") {
    PipelineConfig c;
    c.tau_fraction = 0.95;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = PipelineConfig{};
    c.grid_n = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(parse_roi_mode("single") == RoiMode::Single);
    CHECK_THROWS_AS(parse_roi_mode("both"), ConfigError);
}
