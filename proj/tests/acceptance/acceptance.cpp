// One PASS/FAIL line per acceptance criterion. Exit status is 0 when the set of failing criteria
// equals the --expect-fail list (empty by default).

#include "../support.hpp"
#include "ctscan/commands.hpp"
#include "ctscan/metrics.hpp"
#include "ctscan/racnet/checkpoint.hpp"
#include "ctscan/segmentation.hpp"
#include "ctscan/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace ctscan;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kMetricTol = 0.01;
constexpr double kMetricBudget = 1.0;
constexpr int kOracleInstances = 1000;
constexpr double kRoiBudget = 30.0;
constexpr double kBboxBudget = 10.0;
constexpr double kPhantomBudget = 5.0;
constexpr int kRoutingTrials = 20000;
constexpr double kFdStep = 1e-6;
constexpr double kFdTol = 1e-6;
constexpr double kMaskingBudget = 30.0;
constexpr double kInvarianceTol = 1e-9;
constexpr double kProbTol = 1e-6;
constexpr int kProbInputs = 100;
constexpr double kSmokeMacroF1 = 0.95;
constexpr int kSmokeSteps = 200;
constexpr double kSmokeBudget = 300.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------------------------

Outcome full_scale() {
    return {false, "not reproduced: needs restricted full-size CT datasets and GPU-scale training; "
                   "covered by the substitute criteria below"};
}

Outcome metric_arithmetic() {
    const auto t0 = Clock::now();
    struct Row {
        const char* name;
        double macro, covid, non_covid;
    };
    const Row table1[] = {
        {"MDAP", 87.87, 78.80, 96.95},
        {"MDAP+seg", 89.87, 81.50, 97.25},
        {"FDVTS", 89.11, 80.92, 97.31},
        {"FDVTS+seg", 90.61, 82.22, 97.51},
        {"ACVLab", 89.11, 80.78, 97.45},
        {"ACVLab+seg", 90.61, 82.08, 97.65},
        {"RACNet unsegmented", 93.06, 92.18, 93.95},
        {"RACNet conventional", 95.06, 94.18, 95.95},
        {"RACNet+seg", 96.81, 95.68, 97.95},
    };
    std::ostringstream bad;
    int ok = 0;
    for (const Row& r : table1) {
        const std::vector<double> per_class{r.covid, r.non_covid};
        const double m = metrics::macro_f1<double>(per_class);
        if (std::abs(m - r.macro) <= kMetricTol) {
            ++ok;
        } else {
            bad << "; " << r.name << " mean " << fmt("%.3f", m) << " vs " << fmt("%.2f", r.macro);
        }
    }
    const double f = 100.0 * metrics::f1(0.7943, 0.9843);
    const bool mc3 = std::abs(f - 87.92) <= kMetricTol;
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "published F1 table: " << ok << "/9 rows consistent" << bad.str() << "; MC3_18 f1 " << fmt("%.3f", f) << " vs 87.92";
    return {ok == 9 && mc3 && secs < kMetricBudget, d.str()};
}

// ---------------------------------------------------------------------------------------------

Mask random_blob(int rows, int cols, std::mt19937_64& gen) {
    Mask m(rows, cols);
    const int kind = int(gen() % 3);
    const int y0 = int(gen() % std::uint64_t(rows));
    const int x0 = int(gen() % std::uint64_t(cols));
    const int h = 1 + int(gen() % std::uint64_t(rows - y0));
    const int w = 1 + int(gen() % std::uint64_t(cols - x0));
    for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
            if (kind == 0 || (kind == 1 && (x + y) % 3 != 0) || (kind == 2 && gen() % 4 == 0)) m.set(y, x, true);
        }
    }
    if (m.empty()) m.set(y0, x0, true);
    return m;
}

Outcome roi_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0), s(-1.0, 1.0);
    FakeEmbedder embedder;
    int mismatches = 0;
    for (int n = 0; n < kOracleInstances; ++n) {
        const int rows = 8 + int(gen() % 40);
        const int cols = 8 + int(gen() % 40);
        ImageArray<double> img(rows, cols);
        for (Eigen::Index i = 0; i < img.size(); ++i) img(i) = u(gen) < 0.1 ? 0.0 : u(gen);
        const SliceImage slice(img);
        const int count = 2 + int(gen() % 19);
        CropSet crops;
        for (int k = 0; k < count; ++k) {
            crops.push_back({std::size_t(k), crop_with_mask(slice, random_blob(rows, cols, gen))});
        }
        EmbeddingVec text(4);
        for (int i = 0; i < 4; ++i) text(i) = s(gen);
        if (text.norm() == 0.0) text(0) = 1.0;

        // Brute force: every crop, plain dot / norms, first maximum wins.
        std::size_t best = 0;
        double best_score = -2.0;
        for (std::size_t k = 0; k < crops.size(); ++k) {
            const EmbeddingVec e = embedder.embed_image(crops[k].image);
            const double score = e.dot(text) / (std::sqrt(e.dot(e)) * std::sqrt(text.dot(text)));
            if (score > best_score) {
                best_score = score;
                best = k;
            }
        }
        if (select_roi(crops, embedder, text).position != best) ++mismatches;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < kRoiBudget,
            std::to_string(kOracleInstances) + " instances, " + std::to_string(mismatches) + " mismatches, " +
                fmt("%.2f s", secs)};
}

Outcome bbox_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(7);
    int mismatches = 0;
    for (int n = 0; n < kOracleInstances; ++n) {
        const int rows = 1 + int(gen() % 64);
        const int cols = 1 + int(gen() % 64);
        Mask m = random_blob(rows, cols, gen);
        if (gen() % 2) m = m | random_blob(rows, cols, gen);
        BoundingBox scan{cols, rows, -1, -1};
        for (int y = 0; y < rows; ++y) {
            for (int x = 0; x < cols; ++x) {
                if (!m(y, x)) continue;
                scan.x_min = std::min(scan.x_min, x);
                scan.y_min = std::min(scan.y_min, y);
                scan.x_max = std::max(scan.x_max, x);
                scan.y_max = std::max(scan.y_max, y);
            }
        }
        if (!(compute_bbox(m) == scan)) ++mismatches;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < kBboxBudget,
            std::to_string(kOracleInstances) + " masks, " + std::to_string(mismatches) + " mismatches, " +
                fmt("%.2f s", secs)};
}

Outcome area_filter_oracle() {
    std::mt19937_64 gen(11);
    int mismatches = 0;
    long boundary_hits = 0;
    for (int n = 0; n < kOracleInstances; ++n) {
        const int rows = 10 + int(gen() % 30);
        const int cols = 10 + int(gen() % 30);
        const long area = long(rows) * cols;
        const double tau = double(gen() % 100) / 400.0;  // [0, 0.25), includes 0
        const long lower = long(std::floor(tau * double(area)));
        const long upper = long(std::floor(0.9 * double(area)));
        std::vector<Mask> masks;
        const int count = int(gen() % 12);
        for (int k = 0; k < count; ++k) {
            long a;
            switch (gen() % 6) {
                case 0: a = lower; break;
                case 1: a = lower + 1; break;
                case 2: a = upper; break;
                case 3: a = upper + 1; break;
                case 4: a = 0; break;
                default: a = long(gen() % std::uint64_t(area + 1)); break;
            }
            a = std::clamp(a, 0L, area);
            Mask m(rows, cols);
            std::vector<long> cells(static_cast<std::size_t>(area));
            for (long i = 0; i < area; ++i) cells[std::size_t(i)] = i;
            std::shuffle(cells.begin(), cells.end(), gen);
            for (long i = 0; i < a; ++i) m.set(int(cells[std::size_t(i)] / cols), int(cells[std::size_t(i)] % cols), true);
            masks.push_back(std::move(m));
        }
        std::vector<std::size_t> expected;
        for (std::size_t k = 0; k < masks.size(); ++k) {
            long on = 0;
            for (int y = 0; y < rows; ++y) {
                for (int x = 0; x < cols; ++x) on += masks[k](y, x);
            }
            if (double(on) == tau * double(area) || double(on) == 0.9 * double(area)) ++boundary_hits;
            if (double(on) > tau * double(area) && double(on) <= 0.9 * double(area)) expected.push_back(k);
        }
        if (filter_mask_indices(masks, tau, area) != expected) ++mismatches;
        const auto kept = filter_masks(masks, tau, area);
        bool same = kept.size() == expected.size();
        for (std::size_t i = 0; same && i < kept.size(); ++i) same = kept[i] == masks[expected[i]];
        if (!same) ++mismatches;
    }
    return {mismatches == 0, std::to_string(kOracleInstances) + " lists, " + std::to_string(mismatches) +
                                 " mismatches, " + std::to_string(boundary_hits) + " exact-boundary masks"};
}

Outcome phantom_end_to_end() {
    const auto t0 = Clock::now();
    int failures = 0;
    int slices = 0;
    for (double phase : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        for (bool opacities : {false, true}) {
            synthetic::PhantomSpec spec;
            spec.phase = phase;
            spec.opacities = opacities;
            spec.seed = std::uint64_t(slices);
            const synthetic::Phantom ph = synthetic::make_phantom(spec);
            synthetic::SyntheticScan scan;
            scan.phantoms.push_back(ph);
            FakeSegmenter seg;
            FakeEmbedder emb;
            synthetic::configure_fakes({scan}, seg, emb);
            const Mask out = SlicePipeline(seg, emb, PipelineConfig{}).run(ph.image).mask;
            const Mask expected = ph.right_lung | ph.left_lung;
            if (!(out == expected) || (out.bits() && ph.blob.bits()).any()) ++failures;
            ++slices;
        }
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && secs < kPhantomBudget,
            std::to_string(slices) + " phantom slices, " + std::to_string(failures) +
                " differ from the union of both lungs or keep the blob, " + fmt("%.2f s", secs)};
}

Outcome routing_properties() {
    std::mt19937_64 gen(3);
    int violations = 0;
    auto check = [&](int t, int l) {
        const racnet::RoutingPlan p = racnet::plan_aligned(t, l);
        bool ok = p.length() == l;
        for (int i = 1; ok && i < l; ++i) ok = p.selected[std::size_t(i)] > p.selected[std::size_t(i - 1)];
        ok = ok && p.selected.front() >= 0 && p.selected.back() <= t - 1;
        if (l >= 2) ok = ok && p.selected.front() == 0 && p.selected.back() == t - 1;
        if (!ok) ++violations;
    };
    for (int n = 0; n < kRoutingTrials; ++n) {
        const int t = 1 + int(gen() % 1000);
        check(t, 1 + int(gen() % std::uint64_t(t)));
    }
    int identity_failures = 0;
    for (int t = 1; t <= 1000; ++t) {
        const auto p = racnet::plan_aligned(t, t);
        for (int i = 0; i < t; ++i) {
            if (p.selected[std::size_t(i)] != i) {
                ++identity_failures;
                break;
            }
        }
        check(t, 1);
        check(t, t);
    }
    return {violations == 0 && identity_failures == 0,
            std::to_string(kRoutingTrials) + " random (t,l) plus all t <= 1000: " + std::to_string(violations) +
                " property violations, " + std::to_string(identity_failures) + " plan(t,t) != identity"};
}

// ---------------------------------------------------------------------------------------------

racnet::RACNetConfig toy_config() {
    racnet::RACNetConfig c;
    c.t = 8;
    c.rnn_units = 4;
    c.feature_dim = 6;
    c.dense_units = 5;
    c.input_rows = 8;
    c.input_cols = 8;
    c.conv_channels = {2};
    return c;
}

racnet::SequenceFeatures<double> random_features(const racnet::RACNetConfig& c, int l, std::mt19937_64& gen) {
    std::normal_distribution<double> n(0.0, 1.0);
    racnet::Matrix<double> raw(l, c.feature_dim);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = n(gen);
    return racnet::place_features(raw, racnet::make_plan(c.routing, c.t, l));
}

Outcome gradient_masking() {
    const auto t0 = Clock::now();
    const racnet::RACNetConfig c = toy_config();
    racnet::Model<double> model(c, 17);
    std::mt19937_64 gen(5);
    // aligned(8,2) = {0,7}, aligned(8,3) = {0,4,7}: positions 1,2,3,5,6 are in no plan.
    std::vector<racnet::LabeledFeatures<double>> batch{{random_features(c, 2, gen), 0},
                                                       {random_features(c, 3, gen), 1}};
    std::vector<const racnet::RoutingPlan*> plans{&batch[0].features.plan, &batch[1].features.plan};
    const auto active = racnet::active_positions(c.t, plans);

    racnet::Parameters<double> grads;
    racnet::batch_gradients<double>(model, batch, grads);
    auto loss = [&] {
        racnet::Parameters<double> scratch;
        return racnet::batch_gradients<double>(model, batch, scratch);
    };

    const Eigen::Index U = c.rnn_units;
    double max_analytic = 0, max_fd = 0, max_active_err = 0;
    int frozen_weights = 0;
    for (int k = 0; k < c.t; ++k) {
        for (Eigen::Index col = k * U; col < (k + 1) * U; ++col) {
            for (Eigen::Index row = 0; row < model.params.dense_w.rows(); ++row) {
                double& w = model.params.dense_w(row, col);
                const double saved = w;
                w = saved + kFdStep;
                const double up = loss();
                w = saved - kFdStep;
                const double down = loss();
                w = saved;
                const double fd = (up - down) / (2 * kFdStep);
                if (active[std::size_t(k)]) {
                    max_active_err = std::max(max_active_err, std::abs(fd - grads.dense_w(row, col)));
                } else {
                    ++frozen_weights;
                    max_analytic = std::max(max_analytic, std::abs(grads.dense_w(row, col)));
                    max_fd = std::max(max_fd, std::abs(fd));
                }
            }
        }
    }

    racnet::Adam<double> adam;
    const racnet::Matrix<double> before = model.params.dense_w;
    // Several steps so the moment estimates of active blocks are non-zero.
    for (int s = 0; s < 3; ++s) racnet::train_step<double>(model, adam, batch, 1e-2);
    bool identical = true, moved = false;
    for (int k = 0; k < c.t; ++k) {
        const auto now = model.params.dense_w.middleCols(k * U, U).array();
        const auto was = before.middleCols(k * U, U).array();
        if (active[std::size_t(k)]) {
            moved = moved || (now != was).any();
        } else {
            identical = identical && (now == was).all();
        }
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << frozen_weights << " unselected weights: max |analytic| " << max_analytic << ", max |FD| " << max_fd
      << ", bit-identical after train_step: " << (identical ? "yes" : "no") << "; selected blocks FD error "
      << max_active_err << ", " << fmt("%.2f s", secs);
    return {max_analytic == 0.0 && max_fd <= kFdTol && identical && moved && max_active_err < 1e-6 &&
                secs < kMaskingBudget,
            d.str()};
}

Outcome output_invariance() {
    const racnet::RACNetConfig c = toy_config();
    racnet::Model<double> model(c, 19);
    std::mt19937_64 gen(23);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int l = 1 + int(gen() % std::uint64_t(c.t - 1));
        const auto plan = racnet::make_plan(trial % 2 ? racnet::Routing::Aligned : racnet::Routing::FirstL, c.t, l);
        racnet::Matrix<double> raw(c.t, c.rnn_units);
        for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = n(gen);
        const int label = int(gen() % 2);
        const double base = racnet::loss_from_recurrent(model, raw, plan, label);
        const auto on = plan.membership();
        racnet::Matrix<double> perturbed = raw;
        for (int k = 0; k < c.t; ++k) {
            if (on[std::size_t(k)]) continue;
            for (Eigen::Index u = 0; u < c.rnn_units; ++u) perturbed(k, u) += 100.0 * n(gen);
        }
        worst = std::max(worst, std::abs(racnet::loss_from_recurrent(model, perturbed, plan, label) - base));
    }
    return {worst < kInvarianceTol, "200 perturbations, max |delta loss| " + fmt("%.3g", worst)};
}

Outcome probability_validity() {
    racnet::RACNetConfig c = toy_config();
    c.t = 16;
    racnet::Model<double> model(c, 29);
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int lengths[] = {1, c.t / 2, c.t};
    double worst_sum = 0.0;
    bool in_range = true;
    for (int n = 0; n < kProbInputs; ++n) {
        const int l = lengths[n % 3];
        ScanVolume v;
        v.scan_id = "p" + std::to_string(n);
        for (int i = 0; i < l; ++i) {
            ImageArray<double> img(12, 12);
            for (Eigen::Index k = 0; k < img.size(); ++k) img(k) = u(gen) * (n % 7 == 0 ? 50.0 : 1.0);
            v.slices.emplace_back(img);
        }
        const auto out = racnet::classify_scan<double>(v, {}, model);
        worst_sum = std::max(worst_sum, std::abs(out.probabilities.sum() - 1.0));
        in_range = in_range && out.probabilities.minCoeff() >= 0.0 && out.probabilities.maxCoeff() <= 1.0;
    }
    return {worst_sum <= kProbTol && in_range,
            std::to_string(kProbInputs) + " inputs with l in {1, t/2, t}, max |sum - 1| " + fmt("%.3g", worst_sum) +
                ", entries in [0,1]: " + (in_range ? "yes" : "no")};
}

// ---------------------------------------------------------------------------------------------

struct SmokeArtifacts {
    std::string train_log_a, train_log_b, ckpt_a, ckpt_b;
    std::string seg_a, seg_b;
    double macro_f1 = -1;
    double train_seconds = 0;
    bool ok = false;
    std::string error;
};

std::string tree_bytes(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += fs::relative(f, root).generic_string() + "\n" + testing::slurp(f);
    return all;
}

SmokeArtifacts run_smoke(const fs::path& root) {
    SmokeArtifacts a;
    std::ostringstream out, err;
    const fs::path train_root = root / "train", test_root = root / "heldout";
    if (cli::cmd_synth(train_root, 10, 8, 16, 64, 1, out, err) != 0 ||
        cli::cmd_synth(test_root, 10, 8, 16, 64, 2, out, err) != 0) {
        a.error = err.str();
        return a;
    }
    RunConfig train_cfg;
    apply_config_file(train_cfg, train_root / "desk.ini");
    RunConfig test_cfg;
    apply_config_file(test_cfg, test_root / "desk.ini");
    train_cfg.train_steps = kSmokeSteps;

    RunConfig seg_b = train_cfg;
    seg_b.output_root = root / "masks_rerun";
    seg_b.workers = 2;
    if (cli::cmd_segment(train_cfg, {}, out, err) != 0 || cli::cmd_segment(seg_b, {}, out, err) != 0 ||
        cli::cmd_segment(test_cfg, {}, out, err) != 0) {
        a.error = err.str();
        return a;
    }
    a.seg_a = tree_bytes(train_cfg.output_root);
    a.seg_b = tree_bytes(seg_b.output_root);

    const auto t0 = Clock::now();
    if (cli::cmd_train(train_cfg, train_root / "dataset.tsv", root / "a.ckpt", root / "a.tsv", out, err) != 0) {
        a.error = err.str();
        return a;
    }
    a.train_seconds = seconds_since(t0);
    if (cli::cmd_train(train_cfg, train_root / "dataset.tsv", root / "b.ckpt", root / "b.tsv", out, err) != 0) {
        a.error = err.str();
        return a;
    }
    a.train_log_a = testing::slurp(root / "a.tsv");
    a.train_log_b = testing::slurp(root / "b.tsv");
    a.ckpt_a = testing::slurp(root / "a.ckpt");
    a.ckpt_b = testing::slurp(root / "b.ckpt");

    const auto t1 = Clock::now();

    // Held-out evaluation, in process so the score is exact rather than parsed from text.
    racnet::Model<double> model(train_cfg.racnet, train_cfg.seed);
    racnet::Checkpoint::load(root / "a.ckpt").restore(model);
    metrics::ConfusionCounts counts(2);
    for (const auto& scan : cli::prepare_dataset(train_cfg, test_root / "dataset.tsv", true)) {
        counts.add(*scan.label, racnet::classify_scan(scan, model).predicted());
    }
    a.macro_f1 = metrics::evaluate(counts, {"NON_COVID", "COVID"}).macro_f1;
    a.train_seconds += seconds_since(t1);  // evaluation counts too
    a.ok = true;
    return a;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<std::string> expected_failures;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        const std::string prefix = "--expect-fail=";
        if (arg.rfind(prefix, 0) == 0) {
            std::stringstream list(arg.substr(prefix.size()));
            std::string id;
            while (std::getline(list, id, ',')) expected_failures.insert(id);
        }
    }

    std::set<std::string> failed;
    auto report = [&](const std::string& id, const std::string& title, const Outcome& o) {
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << title << ": " << o.detail << std::endl;
        if (!o.pass) failed.insert(id);
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };

    report("C01", "full-scale results", full_scale());
    report("C02", "metric arithmetic", guarded(metric_arithmetic));
    report("C03", "ROI-selection oracle", guarded(roi_oracle));
    report("C04", "bounding-box oracle", guarded(bbox_oracle));
    report("C05", "area-filter oracle", guarded(area_filter_oracle));
    report("C06", "end-to-end phantom", guarded(phantom_end_to_end));
    report("C07", "routing plans", guarded(routing_properties));
    report("C08", "gradient masking", guarded(gradient_masking));
    report("C09", "output invariance", guarded(output_invariance));
    report("C10", "probability validity", guarded(probability_validity));

    testing::TempDir dir("acceptance");
    SmokeArtifacts smoke;
    try {
        smoke = run_smoke(dir.path());
    } catch (const std::exception& e) {
        smoke.error = e.what();
    }
    if (!smoke.ok) {
        report("C11", "desk-scale learning", {false, "run failed: " + smoke.error});
        report("C12", "determinism", {false, "run failed: " + smoke.error});
    } else {
        const bool deterministic_train = smoke.train_log_a == smoke.train_log_b && smoke.ckpt_a == smoke.ckpt_b;
        report("C11", "desk-scale learning",
               {smoke.macro_f1 >= kSmokeMacroF1 && smoke.train_seconds < kSmokeBudget && deterministic_train,
                "10 train / 10 held-out volumes, t=16, 64x64, " + std::to_string(kSmokeSteps) +
                    " steps: held-out macro F1 " + fmt("%.4f", smoke.macro_f1) + ", " +
                    fmt("%.1f s", smoke.train_seconds) + ", seeded rerun identical: " +
                    (deterministic_train ? "yes" : "no")});
        const bool seg_same = smoke.seg_a == smoke.seg_b && !smoke.seg_a.empty();
        report("C12", "determinism",
               {seg_same && deterministic_train,
                std::string("segment outputs (1 vs 2 workers) byte-identical: ") + (seg_same ? "yes" : "no") +
                    "; train log and checkpoint byte-identical: " + (deterministic_train ? "yes" : "no")});
    }

    std::cout << failed.size() << " of 12 criteria failed";
    if (!expected_failures.empty()) {
        std::cout << " (expected to fail:";
        for (const auto& id : expected_failures) std::cout << ' ' << id;
        std::cout << ')';
    }
    std::cout << std::endl;
    return failed == expected_failures ? 0 : 1;
}
