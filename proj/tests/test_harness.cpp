#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "set2seq/harness/trainer.hpp"
#include "test_util.hpp"

using namespace set2seq;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(const std::string& extra = "") {
    return resolve_config(
        "[model]\nd_model = 8\nn_heads = 2\nn_sit_layers = 1\n"
        "[optim]\nbatch_size = 4\nepochs = 3\nlr = 3e-3\n"
        "[data]\ntask = grammar\ntrain_count = 40\ntest_count = 10\n"
        "[grammar]\nn_max = 3\n" + extra,
        {});
}

// Sets of scalars whose target is ascending order.
Dataset argsort_data(std::size_t count, std::uint64_t seed) {
    SeededRng rng(seed);
    Dataset ds;
    for (std::size_t i = 0; i < count; ++i) {
        const auto n = rng.uniform_int(3, 5);
        Instance inst;
        inst.task = "embedded";
        inst.elements.resize(n, 1);
        std::vector<std::size_t> idx(static_cast<std::size_t>(n));
        for (Eigen::Index r = 0; r < n; ++r) inst.elements(r, 0) = rng.uniform(-1, 1), idx[static_cast<std::size_t>(r)] = static_cast<std::size_t>(r);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return inst.elements(static_cast<Eigen::Index>(a), 0) < inst.elements(static_cast<Eigen::Index>(b), 0); });
        inst.target = Permutation(idx);
        ds.push_back(std::move(inst));
    }
    return ds;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("set2seq_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Config, PaperDefaultsAndProfiles) {
    RunConfig paper;
    EXPECT_EQ(paper.optim.lr, 1e-4);
    EXPECT_EQ(paper.optim.weight_decay, 1e-2);
    EXPECT_EQ(paper.optim.batch_size, 32u);
    EXPECT_EQ(paper.optim.epochs, 50u);
    EXPECT_EQ(paper.optim.lambda, 0.1);
    EXPECT_EQ(paper.optim.dropout, 0.1);
    EXPECT_EQ(paper.model.encoder.d_model, 256);
    auto desk = resolve_config("", {});
    EXPECT_EQ(desk.profile, "desk");
    EXPECT_EQ(desk.model.encoder.d_model, 64);
    EXPECT_EQ(desk.model.encoder.n_heads, 2);
    EXPECT_EQ(desk.model.encoder.n_sit_layers, 2);
    EXPECT_EQ(desk.optim.epochs, 20u);
    auto p = resolve_config("[run]\nprofile = paper\n", {});
    EXPECT_EQ(p.model.encoder.d_model, 256);
    EXPECT_EQ(p.model.encoder.n_heads, 4);
    EXPECT_EQ(p.optim.epochs, 50u);
    EXPECT_EQ(p.optim.lr, 1e-4);
    auto k = resolve_config("[run]\nprofile = paper\n[grammar]\nkind = anbkcnk\n", {});
    EXPECT_EQ(k.data.grammar.n_max, 25);
    auto dy = resolve_config("", {"grammar.kind=dyck"});
    EXPECT_EQ(dy.data.grammar.n_min, 2);
    EXPECT_THROW(resolve_config("[run]\nprofile = laptop\n", {}), Error);
}

TEST(Config, FileThenOverridePrecedence) {
    auto c = resolve_config("[optim]\nlr = 0.5\nepochs = 7\n", {"optim.lr=0.25"});
    EXPECT_EQ(c.optim.lr, 0.25);
    EXPECT_EQ(c.optim.epochs, 7u);
    EXPECT_EQ(get_key(c, "optim.lr"), "0.25");
}

TEST(Config, OverrideChangesExactlyOneValue) {
    auto base = resolve_config("", {});
    auto changed = resolve_config("", {"optim.lr=3e-4"});
    std::size_t diffs = 0;
    for (const auto& k : config_keys()) diffs += k.get(base) != k.get(changed);
    EXPECT_EQ(diffs, 1u);
    EXPECT_NE(config_hash(base), config_hash(changed));
}

TEST(Config, UnknownKeysListValidOnes) {
    for (auto attempt : {std::function<void()>([] { resolve_config("[optim]\nlearning_rate = 1\n", {}); }),
                         std::function<void()>([] { resolve_config("", {"model.width=3"}); })}) {
        try {
            attempt();
            ADD_FAILURE() << "no error";
        } catch (const Error& e) {
            const std::string msg = e.what();
            EXPECT_NE(msg.find("unknown config key"), std::string::npos);
            EXPECT_NE(msg.find("optim.lr"), std::string::npos);
            EXPECT_NE(msg.find("ruleset.order"), std::string::npos);
        }
    }
    EXPECT_THROW(resolve_config("", {"optim.lr"}), Error);
    EXPECT_THROW(resolve_config("", {"optim.epochs=-2"}), Error);
    EXPECT_THROW(resolve_config("", {"optim.lr=fast"}), Error);
    EXPECT_THROW(resolve_config("", {"model.residual=maybe"}), Error);
}

TEST(Config, CanonicalTextRoundTripsAndHashes) {
    auto c = resolve_config("[model]\nsigma = tanh\n[optim]\nlr = 0.1\n", {"run.seed=99", "run.precision=double"});
    auto again = resolve_config(to_ini(c), {});
    EXPECT_EQ(to_ini(again), to_ini(c));
    EXPECT_EQ(config_hash(again), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);
    // every key yields a different hash when changed
    std::set<std::string> hashes{config_hash(c)};
    auto d = c;
    d.optim.lr = 0.1000000000000001;
    hashes.insert(config_hash(d));
    d = c;
    d.data.tsp.closed_tour = false;
    hashes.insert(config_hash(d));
    EXPECT_EQ(hashes.size(), 3u);
}

TEST(Batching, PaddingTrailsAndPlansCoverEverything) {
    auto c = tiny_config();
    auto ds = generate_train_pool(c);
    SeededRng rng(1);
    for (bool bucket : {true, false}) {
        auto plan = plan_batches(ds, 4, rng, bucket);
        std::multiset<std::size_t> seen;
        for (const auto& b : plan) {
            EXPECT_LE(b.size(), 4u);
            seen.insert(b.begin(), b.end());
        }
        EXPECT_EQ(seen.size(), ds.size());
        EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), ds.size());
    }
    auto batch = make_batch<float>(ds, {0, 1, 2, 3});
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto n = batch.cardinalities[k];
        EXPECT_EQ(count_set(batch.masks[k]), n);
        for (std::size_t r = 0; r < batch.masks[k].size(); ++r) EXPECT_EQ(batch.masks[k][r], r < n ? 1 : 0);
        EXPECT_EQ(batch.elements[k].rows(), batch.n_max);
        EXPECT_EQ(batch.elements[k].bottomRows(batch.n_max - static_cast<Eigen::Index>(n)).norm(), 0.0f);
    }
}

TEST(Batching, InstanceAloneEqualsInsidePaddedBatch) {
    auto c = tiny_config();
    c.data.grammar.n_max = 6;
    auto ds = generate_train_pool(c);
    auto s = TrainState<float>::fresh(c, ds.front().dim());
    s.model.store()[s.model.decoder_weights().v].value.setRandom();  // break the symmetric start
    std::vector<std::size_t> ids(ds.size());
    std::iota(ids.begin(), ids.end(), 0);
    auto batch = make_batch<float>(ds, ids);
    double worst = 0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        auto alone = s.model.decode(ds[k].elements.cast<float>(), true);
        auto padded = s.model.decode(batch.elements[k], batch.masks[k], true);
        ASSERT_EQ(alone.order, padded.order);
        for (std::size_t i = 0; i < alone.log_probs.size(); ++i) {
            const auto n = static_cast<Eigen::Index>(ds[k].size());
            for (Eigen::Index j = 0; j < n; ++j) {
                const float a = alone.log_probs[i](0, j), b = padded.log_probs[i](0, j);
                if (std::isinf(a)) {
                    ASSERT_TRUE(std::isinf(b));
                } else {
                    worst = std::max(worst, static_cast<double>(std::abs(a - b)));
                }
            }
            for (Eigen::Index j = n; j < batch.n_max; ++j) EXPECT_TRUE(std::isinf(padded.log_probs[i](0, j)));
        }
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(Training, SmokeOneEpochTenInstances) {
    auto c = tiny_config();
    c.data.train_count = 10;
    c.optim.epochs = 1;
    auto data = load_splits(c);
    auto out = train(TrainState<float>::fresh(c, data.train.front().dim()), data);
    EXPECT_EQ(out.last.epoch, 1u);
    ASSERT_EQ(out.last.log.size(), 2u);
    EXPECT_TRUE(std::isfinite(out.last.log.back()["train_loss"].get<double>()));
}

TEST(Training, SameSeedSameLog) {
    auto c = tiny_config();
    auto data = load_splits(c);
    auto a = train(TrainState<float>::fresh(c, data.train.front().dim()), data);
    auto b = train(TrainState<float>::fresh(c, data.train.front().dim()), data);
    ASSERT_EQ(a.last.log.size(), 4u);
    for (std::size_t i = 0; i < a.last.log.size(); ++i) EXPECT_EQ(a.last.log[i].dump(), b.last.log[i].dump());
    auto other = c;
    other.seed = 1;
    auto odata = load_splits(other);
    auto o = train(TrainState<float>::fresh(other, odata.train.front().dim()), odata);
    EXPECT_NE(o.last.log.back().dump(), a.last.log.back().dump());
}

TEST(Training, ResumeIsBitIdentical) {
    const auto dir = scratch("resume");
    for (auto precision : {"single", "double"}) {
        auto c = tiny_config(std::string("[run]\nprecision = ") + precision + "\n");
        auto data = load_splits(c);
        with_precision(c.precision, [&](auto tag) {
            using T = decltype(tag);
            const auto d = data.train.front().dim();
            auto full = train(TrainState<T>::fresh(c, d), data);
            TrainOptions stop;
            stop.out_dir = dir.string();
            stop.stop_after = 1;
            train(TrainState<T>::fresh(c, d), data, stop);
            auto resumed_state = load_checkpoint<T>((dir / "last.ckpt").string());
            EXPECT_EQ(resumed_state.epoch, 1u);
            TrainOptions rest;
            rest.out_dir = dir.string();
            auto resumed = train(std::move(resumed_state), data, rest);
            ASSERT_EQ(resumed.last.log.size(), full.last.log.size());
            for (std::size_t i = 0; i < full.last.log.size(); ++i) EXPECT_EQ(resumed.last.log[i].dump(), full.last.log[i].dump());
            for (std::size_t i = 0; i < full.last.model.store().size(); ++i) {
                const auto& x = full.last.model.store()[i].value;
                const auto& y = resumed.last.model.store()[i].value;
                ASSERT_EQ(0, std::memcmp(x.data(), y.data(), sizeof(T) * static_cast<std::size_t>(x.size()))) << full.last.model.store()[i].name;
                EXPECT_EQ(full.last.opt.m[i], resumed.last.opt.m[i]);
            }
            EXPECT_EQ(full.last.rng, resumed.last.rng);
            for (std::size_t i = 0; i < full.best.store().size(); ++i) EXPECT_EQ(full.best.store()[i].value, resumed.best.store()[i].value);
        });
    }
    fs::remove_all(dir);
}

TEST(Training, CheckpointRoundTripAndGuards) {
    const auto dir = scratch("ckpt");
    auto c = tiny_config();
    auto data = load_splits(c);
    auto s = TrainState<float>::fresh(c, data.train.front().dim());
    s.epoch = 3;
    s.best_score = 12.5;
    s.log.push_back({{"epoch", 0}});
    s.rng.next_u64();
    s.opt.m[2].setConstant(0.25f);
    const auto path = (dir / "x.ckpt").string();
    save_checkpoint(s, path);
    auto back = load_checkpoint<float>(path);
    EXPECT_EQ(back.epoch, 3u);
    EXPECT_EQ(back.best_score, 12.5);
    EXPECT_EQ(back.rng, s.rng);
    EXPECT_EQ(to_ini(back.config), to_ini(s.config));
    EXPECT_EQ(back.opt.m[2], s.opt.m[2]);
    for (std::size_t i = 0; i < s.model.store().size(); ++i) EXPECT_EQ(back.model.store()[i].value, s.model.store()[i].value);
    EXPECT_THROW(load_checkpoint<double>(path), Error);
    {
        std::ofstream os((dir / "junk.ckpt").string());
        os << "not a checkpoint";
    }
    EXPECT_THROW(load_checkpoint<float>((dir / "junk.ckpt").string()), Error);
    fs::remove_all(dir);
}

TEST(Training, NonFiniteLossAbortsAndKeepsLastCheckpoint) {
    const auto dir = scratch("nan");
    auto c = tiny_config();
    auto data = load_splits(c);
    TrainOptions o;
    o.out_dir = dir.string();
    o.stop_after = 1;
    auto first = train(TrainState<float>::fresh(c, data.train.front().dim()), data, o);
    auto s = std::move(first.last);
    s.model.store()[0].value(0, 0) = std::numeric_limits<float>::quiet_NaN();
    o.stop_after = 0;
    try {
        train(std::move(s), data, o);
        ADD_FAILURE() << "no divergence error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
    }
    auto kept = load_checkpoint<float>((dir / "last.ckpt").string());
    EXPECT_EQ(kept.epoch, 1u);
    EXPECT_TRUE(std::isfinite(kept.model.store()[0].value(0, 0)));
    fs::remove_all(dir);
}

TEST(Evaluate, DimMismatchAndNoSideEffects) {
    auto c = tiny_config();
    auto data = load_splits(c);
    auto s = TrainState<float>::fresh(c, data.train.front().dim());
    auto before = s.model.store()[3].value;
    auto r = evaluate(s.model, data.test, c);
    EXPECT_EQ(s.model.store()[3].value, before);
    EXPECT_TRUE(r.metrics.count("validity") && r.metrics.count("pmr") && r.metrics.count("tau"));
    auto rc = c;
    rc.data.task = "ruleset";
    rc.data.ruleset.card_min = 3;
    rc.data.ruleset.card_max = 4;
    auto other = generate_test_set(rc);
    try {
        evaluate(s.model, other, c);
        ADD_FAILURE() << "no error";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("width 3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("d_input = 4"), std::string::npos) << msg;
    }
}

TEST(Evaluate, TspGeneralisesToLargerSetsWithoutRetraining) {
    auto c = resolve_config("[model]\nd_model = 8\nn_sit_layers = 1\n[data]\ntask = tsp\ntrain_count = 20\ntest_count = 3\n"
                            "test_n_min = 15\ntest_n_max = 15\n[tsp]\nn_min = 5\nn_max = 10\n[optim]\nepochs = 1\n",
                            {});
    auto data = load_splits(c);
    EXPECT_EQ(data.test.front().size(), 15u);
    EXPECT_FALSE(data.test.front().target);
    auto out = train(TrainState<float>::fresh(c, 2), data);
    auto r = evaluate(out.best, data.test, c);
    EXPECT_GT(r.mean("tour_length"), r.mean("optimal_length") - 1e-9);
    EXPECT_EQ(r.metrics.count("pmr"), 0u);
}

TEST(Training, ArgsortToyConverges) {
    auto c = resolve_config("[model]\nd_model = 16\nn_heads = 2\nn_sit_layers = 1\n"
                            "[optim]\nepochs = 25\nlr = 3e-3\nbatch_size = 16\ndropout = 0\n[data]\ntask = embedded\ntrain_path = unused\n",
                            {});
    Splits data;
    data.train = argsort_data(400, 1);
    data.val = argsort_data(100, 2);
    auto out = train(TrainState<float>::fresh(c, 1), data);
    const auto& first = out.last.log.front();
    const auto& last = out.last.log.back();
    EXPECT_LT(last["val_loss"].get<double>(), 0.5 * first["val_loss"].get<double>());
    EXPECT_GT(score_predictions(data.val, predict(out.best, data.val), "embedded", true).mean("pmr"), 80.0);
}
