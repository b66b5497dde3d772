#include "cystonet/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "cystonet/checkpoint.hpp"
#include "cystonet/metrics.hpp"
#include "cystonet/rng.hpp"

namespace cysto {

namespace fs = std::filesystem;

namespace {

NamedTensors trainable_named(const Model& m) {
    NamedTensors out;
    for (auto& [name, t] : m.named_state())
        if (t.requires_grad()) out.emplace_back(name, t);
    return out;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) raise(ErrorKind::Io, "training checkpoint is missing '" + key + "'");
    return std::stod(it->second);
}

std::int64_t kv_int(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) raise(ErrorKind::Io, "training checkpoint is missing '" + key + "'");
    return std::stoll(it->second);
}

std::uint64_t kv_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) raise(ErrorKind::Io, "training checkpoint is missing '" + key + "'");
    return std::stoull(it->second);
}

}  // namespace

void AdamState::init(const std::vector<Tensor>& params) {
    step = 0;
    m.assign(params.size(), {});
    v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i].assign(params[i].numel(), 0.0);
        v[i].assign(params[i].numel(), 0.0);
    }
}

void adam_step(const std::vector<Tensor>& params, AdamState& state) {
    if (state.m.size() != params.size()) raise(ErrorKind::InvalidArgument, "optimizer state does not match params");
    ++state.step;
    const auto& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i];
        const auto& g = p.grad();
        auto& mi = state.m[i];
        auto& vi = state.v[i];
        if (g.size() != mi.size()) raise(ErrorKind::Shape, "gradient size does not match moments");
        auto& value = p.mutable_data();
        for (std::size_t j = 0; j < g.size(); ++j) {
            mi[j] = c.beta1 * mi[j] + (1.0 - c.beta1) * g[j];
            vi[j] = c.beta2 * vi[j] + (1.0 - c.beta2) * g[j] * g[j];
            value[j] -= c.lr * (mi[j] / bc1) / (std::sqrt(vi[j] / bc2) + c.epsilon);
        }
        p.zero_grad();
    }
}

bool PlateauScheduler::observe(double val_loss) {
    if (std::isnan(val_loss)) raise(ErrorKind::Numeric, "scheduler observed NaN validation loss");
    if (val_loss < best - min_delta) {
        best = val_loss;
        since = 0;
        return false;
    }
    if (++since >= patience) {
        since = 0;
        const double reduced = std::max(lr * factor, min_lr);
        if (reduced < lr) {
            lr = reduced;
            return true;
        }
    }
    return false;
}

void TrainRunConfig::validate() const {
    if (batch_size < 1) raise(ErrorKind::InvalidArgument, "batch_size must be >= 1");
    if (max_epochs < 1) raise(ErrorKind::InvalidArgument, "max_epochs must be >= 1");
    if (loss_weights.w_dice < 0 || loss_weights.w_scce < 0)
        raise(ErrorKind::InvalidArgument, "loss weights must be nonnegative");
    if (augment) augmentation.validate();
}

TrainSession make_session(const ModelConfig& mc, const TrainRunConfig& rc) {
    rc.validate();
    TrainSession s{build_model(mc), rc, {}, rc.scheduler, 1, {}};
    s.adam.config = rc.adam;
    s.adam.init(s.model.trainable());
    s.scheduler.lr = rc.adam.lr;
    s.scheduler.best = std::numeric_limits<double>::infinity();
    s.scheduler.since = 0;
    return s;
}

EpochStats train_epoch(TrainSession& s, const std::vector<SampleRecord>& train_set,
                       const std::vector<SampleRecord>& val_set) {
    if (train_set.empty()) raise(ErrorKind::InvalidArgument, "training split is empty");
    if (val_set.empty()) raise(ErrorKind::InvalidArgument, "validation split is empty");
    const int epoch = s.next_epoch;
    const TrainRunConfig& rc = s.rc;
    s.adam.config.lr = s.scheduler.lr;
    std::vector<Tensor> params = s.model.trainable();

    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng::Stream shuffle_stream(rng::key(rc.seed, "epoch_shuffle", static_cast<std::uint64_t>(epoch)));
    rng::shuffle(order, shuffle_stream);

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = s.scheduler.lr;
    double train_loss_sum = 0.0;
    ConfusionAccumulator train_acc(s.model.config.num_classes);

    for (std::size_t start = 0, batch_index = 0; start < order.size(); start += rc.batch_size, ++batch_index) {
        const std::size_t end = std::min(order.size(), start + rc.batch_size);
        Batch batch;
        if (rc.augment) {
            std::vector<SampleRecord> chunk;
            chunk.reserve(end - start);
            for (std::size_t i = start; i < end; ++i)
                chunk.push_back(augment_for_epoch(train_set[order[i]], rc.augmentation, epoch));
            std::vector<int> all(chunk.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
            batch = make_batch(chunk, all);
        } else {
            batch = make_batch(train_set, {order.begin() + start, order.begin() + end});
        }

        double loss_value;
        {
            GradTape tape;
            Tensor logits = model_forward(s.model, batch.images, true);
            Tensor loss = combined_loss(logits, batch.labels, rc.loss_weights);
            loss_value = loss.item();
            if (!std::isfinite(loss_value))
                raise(ErrorKind::Numeric, "non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                                              std::to_string(batch_index));
            tape.backward(loss);
            train_acc.add(argmax_classes(logits), batch.labels);
        }
        adam_step(params, s.adam);
        train_loss_sum += loss_value * static_cast<double>(end - start);
    }
    stats.train_loss = train_loss_sum / static_cast<double>(order.size());
    stats.train_iou = train_acc.macro(true).iou;

    double val_loss_sum = 0.0;
    ConfusionAccumulator val_acc(s.model.config.num_classes);
    for (std::size_t start = 0; start < val_set.size(); start += rc.batch_size) {
        const std::size_t end = std::min(val_set.size(), start + rc.batch_size);
        std::vector<int> idx;
        for (std::size_t i = start; i < end; ++i) idx.push_back(static_cast<int>(i));
        Batch batch = make_batch(val_set, idx);
        Tensor logits = model_forward(s.model, batch.images, false);
        val_loss_sum += combined_loss(logits, batch.labels, rc.loss_weights).item() * static_cast<double>(end - start);
        val_acc.add(argmax_classes(logits), batch.labels);
    }
    stats.val_loss = val_loss_sum / static_cast<double>(val_set.size());
    stats.val_iou = val_acc.macro(true).iou;

    s.scheduler.observe(stats.val_loss);
    s.history.push_back(stats);
    s.next_epoch = epoch + 1;
    return stats;
}

std::string history_to_tsv(const std::vector<EpochStats>& history) {
    std::string out;
    char line[160];
    for (const auto& e : history) {
        std::snprintf(line, sizeof line, "%d\t%.12g\t%.12g\t%.12g\t%.12g\n", e.epoch, e.train_loss, e.val_loss,
                      e.val_iou, e.lr);
        out += line;
    }
    return out;
}

TrainResult train_loop(TrainSession& s, const std::vector<SampleRecord>& train_set,
                       const std::vector<SampleRecord>& val_set) {
    const std::string out_dir = s.rc.out_dir;
    if (!out_dir.empty()) fs::create_directories(out_dir);
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    for (const auto& e : s.history)  // resumed sessions keep their running best
        if (e.val_loss < best_val) {
            best_val = e.val_loss;
            best_epoch = e.epoch;
        }

    TrainResult result;
    while (s.next_epoch <= s.rc.max_epochs) {
        EpochStats stats = train_epoch(s, train_set, val_set);
        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            best_epoch = stats.epoch;
            if (!out_dir.empty()) save_model(out_dir + "/best.ckpt", s.model);
        }
        if (!out_dir.empty()) {
            std::ofstream hist(out_dir + "/history.tsv", std::ios::trunc);
            hist << history_to_tsv(s.history);
            hist.flush();
            save_session(out_dir + "/last.ckpt", s);
        }
        if (s.rc.stop_at_train_iou >= 0 && stats.train_iou > s.rc.stop_at_train_iou) {
            result.stopped_early = true;
            break;
        }
    }
    // Resuming an already finished run still deposits its artifacts in out_dir.
    if (!out_dir.empty() && !s.history.empty()) {
        std::ofstream hist(out_dir + "/history.tsv", std::ios::trunc);
        hist << history_to_tsv(s.history);
        save_session(out_dir + "/last.ckpt", s);
    }
    result.history = s.history;
    result.epochs_run = s.next_epoch - 1;
    result.best_epoch = best_epoch;
    result.best_val_loss = best_val;
    return result;
}

void save_session(const std::string& path, const TrainSession& s) {
    KvPairs kv;
    const TrainRunConfig& rc = s.rc;
    kv.emplace_back("rc.batch_size", std::to_string(rc.batch_size));
    kv.emplace_back("rc.max_epochs", std::to_string(rc.max_epochs));
    kv.emplace_back("rc.seed", std::to_string(rc.seed));
    kv.emplace_back("rc.w_dice", fmt17(rc.loss_weights.w_dice));
    kv.emplace_back("rc.w_scce", fmt17(rc.loss_weights.w_scce));
    kv.emplace_back("rc.adam.lr", fmt17(rc.adam.lr));
    kv.emplace_back("rc.adam.beta1", fmt17(rc.adam.beta1));
    kv.emplace_back("rc.adam.beta2", fmt17(rc.adam.beta2));
    kv.emplace_back("rc.adam.epsilon", fmt17(rc.adam.epsilon));
    kv.emplace_back("rc.sched.factor", fmt17(rc.scheduler.factor));
    kv.emplace_back("rc.sched.patience", std::to_string(rc.scheduler.patience));
    kv.emplace_back("rc.sched.min_delta", fmt17(rc.scheduler.min_delta));
    kv.emplace_back("rc.sched.min_lr", fmt17(rc.scheduler.min_lr));
    kv.emplace_back("rc.augment", rc.augment ? "1" : "0");
    kv.emplace_back("rc.aug.contrast_lo", fmt17(rc.augmentation.contrast_lo));
    kv.emplace_back("rc.aug.contrast_hi", fmt17(rc.augmentation.contrast_hi));
    kv.emplace_back("rc.aug.rotation_degrees", fmt17(rc.augmentation.rotation_degrees));
    kv.emplace_back("rc.aug.scale_lo", fmt17(rc.augmentation.scale_lo));
    kv.emplace_back("rc.aug.scale_hi", fmt17(rc.augmentation.scale_hi));
    kv.emplace_back("rc.aug.seed", std::to_string(rc.augmentation.seed));
    kv.emplace_back("rc.stop_at_train_iou", fmt17(rc.stop_at_train_iou));
    kv.emplace_back("adam.step", std::to_string(s.adam.step));
    kv.emplace_back("sched.lr", fmt17(s.scheduler.lr));
    kv.emplace_back("sched.best", fmt17(s.scheduler.best));
    kv.emplace_back("sched.since", std::to_string(s.scheduler.since));
    kv.emplace_back("next_epoch", std::to_string(s.next_epoch));
    for (const auto& e : s.history) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "%.17g\t%.17g\t%.17g\t%.17g\t%.17g", e.train_loss, e.val_loss, e.val_iou,
                      e.lr, e.train_iou);
        kv.emplace_back("history." + std::to_string(e.epoch), buf);
    }

    NamedTensors extra;
    NamedTensors named = trainable_named(s.model);
    if (named.size() != s.adam.m.size()) raise(ErrorKind::InvalidArgument, "optimizer state out of sync");
    for (std::size_t i = 0; i < named.size(); ++i) {
        const Shape& shape = named[i].second.shape();
        extra.emplace_back("adam.m." + named[i].first, Tensor::from_data(shape, s.adam.m[i]));
        extra.emplace_back("adam.v." + named[i].first, Tensor::from_data(shape, s.adam.v[i]));
    }
    save_checkpoint(path, s.model.config, s.model.named_state(), &kv, &extra);
}

TrainSession load_session(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (!ck.has_extra) raise(ErrorKind::Io, "checkpoint has no training state: " + path);
    std::map<std::string, std::string> kv(ck.extra_kv.begin(), ck.extra_kv.end());

    TrainRunConfig rc;
    rc.batch_size = static_cast<int>(kv_int(kv, "rc.batch_size"));
    rc.max_epochs = static_cast<int>(kv_int(kv, "rc.max_epochs"));
    rc.seed = kv_u64(kv, "rc.seed");
    rc.loss_weights.w_dice = kv_double(kv, "rc.w_dice");
    rc.loss_weights.w_scce = kv_double(kv, "rc.w_scce");
    rc.adam.lr = kv_double(kv, "rc.adam.lr");
    rc.adam.beta1 = kv_double(kv, "rc.adam.beta1");
    rc.adam.beta2 = kv_double(kv, "rc.adam.beta2");
    rc.adam.epsilon = kv_double(kv, "rc.adam.epsilon");
    rc.scheduler.factor = kv_double(kv, "rc.sched.factor");
    rc.scheduler.patience = static_cast<int>(kv_int(kv, "rc.sched.patience"));
    rc.scheduler.min_delta = kv_double(kv, "rc.sched.min_delta");
    rc.scheduler.min_lr = kv_double(kv, "rc.sched.min_lr");
    rc.augment = kv_int(kv, "rc.augment") != 0;
    rc.augmentation.contrast_lo = kv_double(kv, "rc.aug.contrast_lo");
    rc.augmentation.contrast_hi = kv_double(kv, "rc.aug.contrast_hi");
    rc.augmentation.rotation_degrees = kv_double(kv, "rc.aug.rotation_degrees");
    rc.augmentation.scale_lo = kv_double(kv, "rc.aug.scale_lo");
    rc.augmentation.scale_hi = kv_double(kv, "rc.aug.scale_hi");
    rc.augmentation.seed = kv_u64(kv, "rc.aug.seed");
    rc.stop_at_train_iou = kv_double(kv, "rc.stop_at_train_iou");

    TrainSession s = make_session(ck.config, rc);
    copy_state_into(s.model, ck.tensors);
    s.adam.step = kv_int(kv, "adam.step");
    s.scheduler.lr = kv_double(kv, "sched.lr");
    s.scheduler.best = kv_double(kv, "sched.best");
    s.scheduler.since = static_cast<int>(kv_int(kv, "sched.since"));
    s.next_epoch = static_cast<int>(kv_int(kv, "next_epoch"));

    std::map<std::string, Tensor> extra;
    for (auto& [name, t] : ck.extra_tensors) extra.emplace(name, t);
    NamedTensors named = trainable_named(s.model);
    for (std::size_t i = 0; i < named.size(); ++i) {
        auto m_it = extra.find("adam.m." + named[i].first);
        auto v_it = extra.find("adam.v." + named[i].first);
        if (m_it == extra.end() || v_it == extra.end())
            raise(ErrorKind::Io, "optimizer state missing for '" + named[i].first + "'");
        s.adam.m[i] = m_it->second.data();
        s.adam.v[i] = v_it->second.data();
    }

    for (int e = 1; e < s.next_epoch; ++e) {
        auto it = kv.find("history." + std::to_string(e));
        if (it == kv.end()) continue;
        EpochStats st;
        st.epoch = e;
        if (std::sscanf(it->second.c_str(), "%lg\t%lg\t%lg\t%lg\t%lg", &st.train_loss, &st.val_loss, &st.val_iou,
                        &st.lr, &st.train_iou) != 5)
            raise(ErrorKind::Io, "malformed history record for epoch " + std::to_string(e));
        s.history.push_back(st);
    }
    return s;
}

}  // namespace cysto
