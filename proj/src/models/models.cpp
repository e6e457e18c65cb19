#include "stochlog/models.hpp"

#include "stochlog/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace stochlog {

namespace {

void check_simplex(const std::string &what, std::span<const double> row, std::size_t k) {
    if (row.size() != k)
        throw ModelError(what + ": expected " + std::to_string(k) + " probabilities, got " +
                         std::to_string(row.size()));
    double sum = 0.0;
    for (double v : row) {
        if (!std::isfinite(v) || v < 0.0)
            throw ModelError(what + ": probabilities must be finite and nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw ModelError(what + ": probabilities sum to " + std::to_string(sum));
}

/// Adds d(loss)/d(logits) for p = softmax(logits) given d(loss)/d(p).
void softmax_backward(std::span<const double> p, std::span<const double> upstream, std::span<double> grad) {
    double dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j)
        dot += p[j] * upstream[j];
    for (std::size_t j = 0; j < p.size(); ++j)
        grad[j] += p[j] * (upstream[j] - dot);
}

std::string format_vector(std::span<const double> values) {
    std::ostringstream out;
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < values.size(); ++i)
        out << (i ? " " : "") << values[i];
    return out.str();
}

std::vector<double> parse_vector(const std::string &text, const std::string &context) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
        char *end = nullptr;
        const double v = std::strtod(word.c_str(), &end);
        if (end != word.c_str() + word.size())
            throw ModelError(context + ": bad number '" + word + "'");
        out.push_back(v);
    }
    return out;
}

std::size_t parse_size(const std::string &text, const std::string &context) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ModelError(context + ": bad size '" + text + "'");
    return v;
}

std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void adam_update(std::vector<double> &params, const std::vector<double> &grad, AdamState &state,
                 std::uint64_t step, const AdamConfig &cfg) {
    if (grad.size() != params.size())
        throw TrainingError("gradient size does not match parameter size");
    state.m.resize(params.size(), 0.0);
    state.v.resize(params.size(), 0.0);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

} // namespace

std::string input_key(std::span<const Term> inputs) {
    std::string key;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        key += (i ? "," : "") + to_string(inputs[i]);
    return key;
}

void softmax(std::span<const double> logits, std::span<double> out) {
    if (logits.empty())
        return;
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i)
        out[i] /= sum;
}

// ---------------------------------------------------------------- fixed table

void FixedTableModel::set_row(const std::string &key, std::vector<double> row) {
    check_simplex("model " + name_ + " row " + key, row, outputs_);
    rows_[key] = std::move(row);
}

void FixedTableModel::set_default(std::vector<double> row) {
    check_simplex("model " + name_ + " default row", row, outputs_);
    default_ = std::move(row);
}

void FixedTableModel::forward(std::span<const Term> inputs, std::span<double> out) const {
    const std::string key = input_key(inputs);
    const auto it = rows_.find(key);
    const std::vector<double> *row = it != rows_.end() ? &it->second : nullptr;
    if (!row) {
        if (default_.empty())
            throw ModelError("model " + name_ + " has no row for input " + key);
        row = &default_;
    }
    std::copy(row->begin(), row->end(), out.begin());
}

// -------------------------------------------------------------- softmax table

bool SoftmaxTableModel::add_key(const std::string &key, std::mt19937_64 &rng) {
    if (keys_.count(key))
        return false;
    keys_.emplace(key, keys_.size());
    std::uniform_real_distribution<double> init(-0.1, 0.1);
    for (std::size_t i = 0; i < outputs_; ++i)
        params_.push_back(init(rng));
    return true;
}

void SoftmaxTableModel::forward(std::span<const Term> inputs, std::span<double> out) const {
    const auto it = keys_.find(input_key(inputs));
    if (it == keys_.end()) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(outputs_));
        return;
    }
    softmax(std::span<const double>(params_).subspan(it->second * outputs_, outputs_), out);
}

void SoftmaxTableModel::backward(std::span<const Term> inputs, std::span<const double> probs,
                                 std::span<const double> upstream, std::span<double> grad) const {
    const auto it = keys_.find(input_key(inputs));
    if (it == keys_.end())
        return;
    softmax_backward(probs, upstream, grad.subspan(it->second * outputs_, outputs_));
}

// ------------------------------------------------------------------ dense net

DenseModel::DenseModel(std::string name, std::size_t inputs, std::size_t hidden, std::size_t outputs)
    : Model(std::move(name), outputs), in_(inputs), hidden_(hidden) {
    params_.assign(hidden * inputs + hidden + outputs * hidden + outputs, 0.0);
}

void DenseModel::initialize(std::mt19937_64 &rng) {
    const double s1 = in_ ? 1.0 / std::sqrt(static_cast<double>(in_)) : 0.0;
    const double s2 = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(hidden_, 1)));
    std::uniform_real_distribution<double> u1(-s1, s1), u2(-s2, s2);
    std::size_t i = 0;
    for (std::size_t j = 0; j < hidden_ * in_; ++j)
        params_[i++] = s1 > 0 ? u1(rng) : 0.0;
    for (std::size_t j = 0; j < hidden_; ++j)
        params_[i++] = 0.0;
    for (std::size_t j = 0; j < outputs_ * hidden_; ++j)
        params_[i++] = u2(rng);
    for (std::size_t j = 0; j < outputs_; ++j)
        params_[i++] = 0.0;
}

std::vector<double> DenseModel::gather_input(std::span<const Term> inputs) const {
    std::vector<double> x;
    x.reserve(in_);
    for (const Term &t : inputs) {
        if (!t.is_feature())
            throw ModelError("model " + name_ + " expects feature-vector inputs, got " + to_string(t));
        for (double v : t.feature_value().values) {
            if (!std::isfinite(v))
                throw ModelError("model " + name_ + ": non-finite feature entry in " + to_string(t));
            x.push_back(v);
        }
    }
    if (x.size() != in_)
        throw ModelError("model " + name_ + " expects input dimension " + std::to_string(in_) + ", got " +
                         std::to_string(x.size()));
    return x;
}

void DenseModel::hidden_layer(const std::vector<double> &x, std::vector<double> &h) const {
    const double *w1 = params_.data();
    const double *b1 = w1 + hidden_ * in_;
    h.assign(hidden_, 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
        double a = b1[j];
        for (std::size_t i = 0; i < in_; ++i)
            a += w1[j * in_ + i] * x[i];
        h[j] = std::tanh(a);
    }
}

void DenseModel::forward(std::span<const Term> inputs, std::span<double> out) const {
    const std::vector<double> x = gather_input(inputs);
    std::vector<double> h;
    hidden_layer(x, h);
    const double *w2 = params_.data() + hidden_ * in_ + hidden_;
    const double *b2 = w2 + outputs_ * hidden_;
    std::vector<double> z(outputs_);
    for (std::size_t k = 0; k < outputs_; ++k) {
        double a = b2[k];
        for (std::size_t j = 0; j < hidden_; ++j)
            a += w2[k * hidden_ + j] * h[j];
        z[k] = a;
    }
    softmax(z, out);
}

void DenseModel::backward(std::span<const Term> inputs, std::span<const double> probs,
                          std::span<const double> upstream, std::span<double> grad) const {
    const std::vector<double> x = gather_input(inputs);
    std::vector<double> h;
    hidden_layer(x, h);
    std::vector<double> dz(outputs_, 0.0);
    softmax_backward(probs, upstream, dz);

    const double *w2 = params_.data() + hidden_ * in_ + hidden_;
    double *gw1 = grad.data();
    double *gb1 = gw1 + hidden_ * in_;
    double *gw2 = gb1 + hidden_;
    double *gb2 = gw2 + outputs_ * hidden_;
    std::vector<double> dh(hidden_, 0.0);
    for (std::size_t k = 0; k < outputs_; ++k) {
        gb2[k] += dz[k];
        for (std::size_t j = 0; j < hidden_; ++j) {
            gw2[k * hidden_ + j] += dz[k] * h[j];
            dh[j] += w2[k * hidden_ + j] * dz[k];
        }
    }
    for (std::size_t j = 0; j < hidden_; ++j) {
        const double da = dh[j] * (1.0 - h[j] * h[j]);
        gb1[j] += da;
        for (std::size_t i = 0; i < in_; ++i)
            gw1[j * in_ + i] += da * x[i];
    }
}

// ---------------------------------------------------------------- param store

ParamStore::ParamStore(const Program &program, std::uint64_t seed) : program_(&program), rng_(seed) {
    std::uniform_real_distribution<double> init(-0.1, 0.1);
    logits_.resize(program.groups().size());
    group_adam_.resize(program.groups().size());
    for (std::size_t g = 0; g < program.groups().size(); ++g)
        if (program.groups()[g].kind == GroupKind::Trainable)
            for (std::size_t i = 0; i < program.groups()[g].rules.size(); ++i)
                logits_[g].push_back(init(rng_));
}

void ParamStore::register_model(Symbol name, std::unique_ptr<Model> model) {
    const std::size_t k = program_->model_output_size(name);
    if (model->output_size() != k)
        throw ModelError("model " + symbol_name(name) + " has " + std::to_string(model->output_size()) +
                         " outputs but the grammar declares " + std::to_string(k));
    models_[name] = std::move(model);
    model_adam_.erase(name);
}

Model &ParamStore::model(Symbol name) {
    const auto it = models_.find(name);
    if (it == models_.end())
        throw ModelError("model " + symbol_name(name) + " is not registered");
    return *it->second;
}

const Model &ParamStore::model(Symbol name) const {
    const auto it = models_.find(name);
    if (it == models_.end())
        throw ModelError("model " + symbol_name(name) + " is not registered");
    return *it->second;
}

void ParamStore::check_models() const {
    for (Symbol m : program_->models())
        if (!models_.count(m))
            throw ModelError("model " + symbol_name(m) + " is used by the grammar but not registered");
}

std::vector<double> ParamStore::group_probabilities(std::size_t group) const {
    std::vector<double> p(logits_[group].size());
    softmax(logits_[group], p);
    return p;
}

void ParamStore::register_inputs(const Circuit &c) {
    for (const auto &n : c.neural_leaves()) {
        const auto it = models_.find(n.model);
        if (it == models_.end())
            continue;
        if (auto *table = dynamic_cast<SoftmaxTableModel *>(it->second.get()))
            table->add_key(input_key(n.inputs), rng_);
    }
}

void ParamStore::adam_step(const Gradients &grads, const AdamConfig &cfg) {
    ++step_;
    for (std::size_t g = 0; g < logits_.size(); ++g)
        if (!logits_[g].empty())
            adam_update(logits_[g], grads.groups.at(g), group_adam_[g], step_, cfg);
    for (auto &[name, model] : models_) {
        if (model->parameters().empty())
            continue;
        const auto it = grads.models.find(name);
        if (it == grads.models.end())
            continue;
        adam_update(model->parameters(), it->second, model_adam_[name], step_, cfg);
    }
}

std::string ParamStore::serialize() const {
    std::ostringstream out;
    out << "# stochlog parameters\n";
    out << "step = " << step_ << "\n";
    for (std::size_t g = 0; g < logits_.size(); ++g) {
        if (logits_[g].empty())
            continue;
        const std::string name = program_->groups()[g].name();
        out << "group." << name << " = " << format_vector(logits_[g]) << "\n";
        if (!group_adam_[g].m.empty()) {
            out << "adam.m.group." << name << " = " << format_vector(group_adam_[g].m) << "\n";
            out << "adam.v.group." << name << " = " << format_vector(group_adam_[g].v) << "\n";
        }
    }
    std::vector<std::pair<std::string, const Model *>> sorted;
    for (const auto &[name, model] : models_)
        sorted.emplace_back(symbol_name(name), model.get());
    std::sort(sorted.begin(), sorted.end());
    for (const auto &[name, model] : sorted) {
        const std::string prefix = "model." + name;
        if (const auto *f = dynamic_cast<const FixedTableModel *>(model)) {
            out << prefix << ".fixed = " << f->output_size() << "\n";
            if (!f->default_row().empty())
                out << prefix << ".default = " << format_vector(f->default_row()) << "\n";
            for (const auto &[key, row] : f->rows())
                out << prefix << ".row[" << key << "] = " << format_vector(row) << "\n";
        } else if (const auto *s = dynamic_cast<const SoftmaxTableModel *>(model)) {
            out << prefix << ".softmax = " << s->output_size() << "\n";
            std::vector<std::pair<std::size_t, std::string>> rows;
            for (const auto &[key, row] : s->keys())
                rows.emplace_back(row, key);
            std::sort(rows.begin(), rows.end());
            const std::size_t k = s->output_size();
            for (const auto &[row, key] : rows)
                out << prefix << ".row[" << key << "] = "
                    << format_vector(std::span<const double>(s->parameters()).subspan(row * k, k)) << "\n";
        } else if (const auto *d = dynamic_cast<const DenseModel *>(model)) {
            out << prefix << ".dense = " << d->input_size() << " " << d->hidden_size() << " " << d->output_size()
                << "\n";
            out << prefix << ".params = " << format_vector(d->parameters()) << "\n";
        } else {
            throw ModelError("model " + name + " of kind " + model->kind() + " cannot be saved");
        }
        const auto it = model_adam_.find(intern(name));
        if (it != model_adam_.end() && !it->second.m.empty()) {
            out << "adam.m.model." << name << " = " << format_vector(it->second.m) << "\n";
            out << "adam.v.model." << name << " = " << format_vector(it->second.v) << "\n";
        }
    }
    return out.str();
}

void ParamStore::deserialize(const std::string &text) {
    std::vector<std::vector<double>> logits(program_->groups().size());
    std::vector<AdamState> group_adam(program_->groups().size());
    std::map<Symbol, std::unique_ptr<Model>> models;
    std::map<Symbol, AdamState> model_adam;
    std::uint64_t step = 0;
    std::map<std::string, std::size_t> group_ids;
    for (std::size_t g = 0; g < program_->groups().size(); ++g)
        group_ids[program_->groups()[g].name()] = g;

    auto model_named = [&](const std::string &name, const std::string &context) -> Model & {
        const auto it = models.find(intern(name));
        if (it == models.end())
            throw ModelError(context + ": model " + name + " is not declared before its data");
        return *it->second;
    };

    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string context = "checkpoint line " + std::to_string(lineno);
        if (trim(line).empty() || trim(line)[0] == '#')
            continue;
        const auto eq = line.rfind('=');
        if (eq == std::string::npos)
            throw ModelError(context + ": expected 'key = values'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "step") {
            step = parse_size(value, context);
        } else if (key.rfind("group.", 0) == 0) {
            const auto it = group_ids.find(key.substr(6));
            if (it == group_ids.end() || program_->groups()[it->second].kind != GroupKind::Trainable)
                throw ModelError(context + ": no trainable group " + key.substr(6));
            logits[it->second] = parse_vector(value, context);
            if (logits[it->second].size() != program_->groups()[it->second].rules.size())
                throw ModelError(context + ": wrong number of logits for " + key.substr(6));
        } else if (key.rfind("adam.", 0) == 0) {
            const bool is_m = key.rfind("adam.m.", 0) == 0;
            const std::string rest = key.substr(7);
            AdamState *state = nullptr;
            if (rest.rfind("group.", 0) == 0) {
                const auto it = group_ids.find(rest.substr(6));
                if (it == group_ids.end())
                    throw ModelError(context + ": unknown group " + rest.substr(6));
                state = &group_adam[it->second];
            } else if (rest.rfind("model.", 0) == 0) {
                state = &model_adam[intern(rest.substr(6))];
            } else {
                throw ModelError(context + ": unknown key " + key);
            }
            (is_m ? state->m : state->v) = parse_vector(value, context);
        } else if (key.rfind("model.", 0) == 0) {
            const std::string rest = key.substr(6);
            const auto bracket = rest.find(".row[");
            if (bracket != std::string::npos && rest.back() == ']') {
                const std::string name = rest.substr(0, bracket);
                const std::string row_key = rest.substr(bracket + 5, rest.size() - bracket - 6);
                Model &m = model_named(name, context);
                auto row = parse_vector(value, context);
                if (auto *f = dynamic_cast<FixedTableModel *>(&m)) {
                    f->set_row(row_key, std::move(row));
                } else if (auto *s = dynamic_cast<SoftmaxTableModel *>(&m)) {
                    if (row.size() != s->output_size())
                        throw ModelError(context + ": wrong row length for " + name);
                    std::mt19937_64 unused;
                    if (!s->add_key(row_key, unused))
                        throw ModelError(context + ": duplicate row " + row_key);
                    std::copy(row.begin(), row.end(), s->parameters().end() - static_cast<long>(row.size()));
                } else {
                    throw ModelError(context + ": model " + name + " has no rows");
                }
                continue;
            }
            const auto dot = rest.rfind('.');
            if (dot == std::string::npos)
                throw ModelError(context + ": unknown key " + key);
            const std::string name = rest.substr(0, dot);
            const std::string field = rest.substr(dot + 1);
            if (field == "fixed") {
                models[intern(name)] = std::make_unique<FixedTableModel>(name, parse_size(value, context));
            } else if (field == "softmax") {
                models[intern(name)] = std::make_unique<SoftmaxTableModel>(name, parse_size(value, context));
            } else if (field == "dense") {
                const auto dims = parse_vector(value, context);
                if (dims.size() != 3)
                    throw ModelError(context + ": dense models need 'inputs hidden outputs'");
                models[intern(name)] = std::make_unique<DenseModel>(name, static_cast<std::size_t>(dims[0]),
                                                                    static_cast<std::size_t>(dims[1]),
                                                                    static_cast<std::size_t>(dims[2]));
            } else if (field == "default") {
                auto *f = dynamic_cast<FixedTableModel *>(&model_named(name, context));
                if (!f)
                    throw ModelError(context + ": only fixed tables have a default row");
                f->set_default(parse_vector(value, context));
            } else if (field == "params") {
                Model &m = model_named(name, context);
                auto params = parse_vector(value, context);
                if (params.size() != m.parameters().size())
                    throw ModelError(context + ": wrong parameter count for " + name);
                m.parameters() = std::move(params);
            } else {
                throw ModelError(context + ": unknown key " + key);
            }
        } else {
            throw ModelError(context + ": unknown key " + key);
        }
    }
    for (std::size_t g = 0; g < logits.size(); ++g)
        if (program_->groups()[g].kind == GroupKind::Trainable && logits[g].empty())
            throw ModelError("checkpoint lacks logits for group " + program_->groups()[g].name());
    for (const auto &[name, model] : models)
        if (program_->model_output_size(name) != model->output_size())
            throw ModelError("checkpoint model " + symbol_name(name) + " has the wrong output size");
    logits_ = std::move(logits);
    group_adam_ = std::move(group_adam);
    models_ = std::move(models);
    model_adam_ = std::move(model_adam);
    step_ = step;
}

void ParamStore::save(const std::string &path) const {
    std::ofstream out(path);
    if (!out)
        throw ModelError("cannot write " + path);
    out << serialize();
    if (!out)
        throw ModelError("error writing " + path);
}

void ParamStore::load(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ModelError("cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    deserialize(text.str());
}

// ------------------------------------------------------------------ gradients

Gradients Gradients::zeros_like(const ParamStore &params) {
    Gradients g;
    for (std::size_t i = 0; i < params.program().groups().size(); ++i)
        g.groups.emplace_back(params.group_logits(i).size(), 0.0);
    for (const auto &[name, model] : params.models())
        g.models[name].assign(model->parameters().size(), 0.0);
    return g;
}

void Gradients::add(const Gradients &other, double scale) {
    for (std::size_t i = 0; i < groups.size(); ++i)
        for (std::size_t j = 0; j < groups[i].size(); ++j)
            groups[i][j] += scale * other.groups[i][j];
    for (auto &[name, g] : models) {
        const auto it = other.models.find(name);
        if (it == other.models.end())
            continue;
        for (std::size_t j = 0; j < g.size(); ++j)
            g[j] += scale * it->second[j];
    }
}

double Gradients::squared_norm() const {
    double s = 0.0;
    for (const auto &g : groups)
        for (double v : g)
            s += v * v;
    for (const auto &[name, g] : models)
        for (double v : g)
            s += v * v;
    return s;
}

// --------------------------------------------------------------- neural cache

const std::vector<double> &NeuralCache::get(Symbol model, std::span<const Term> inputs) {
    auto key = std::make_pair(model, input_key(inputs));
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        const Model &m = params_->model(model);
        Entry e{std::vector<Term>(inputs.begin(), inputs.end()), std::vector<double>(m.output_size())};
        m.forward(inputs, e.probs);
        it = entries_.emplace(std::move(key), std::move(e)).first;
    }
    return it->second.probs;
}

void NeuralCache::precompute(std::span<const Circuit *const> circuits, bool parallel) {
    std::vector<std::pair<const std::pair<Symbol, std::string>, Entry> *> todo;
    for (const Circuit *c : circuits)
        for (const auto &n : c->neural_leaves()) {
            auto key = std::make_pair(n.model, input_key(n.inputs));
            if (entries_.count(key))
                continue;
            const Model &m = params_->model(n.model);
            auto it = entries_.emplace(std::move(key), Entry{n.inputs, {}}).first;
            it->second.probs.assign(m.output_size(), std::numeric_limits<double>::quiet_NaN());
            todo.push_back(&*it);
        }
    const long count = static_cast<long>(todo.size());
    std::string error;
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
    for (long i = 0; i < count; ++i) {
        auto &[key, entry] = *todo[static_cast<std::size_t>(i)];
        try {
            params_->model(key.first).forward(entry.inputs, entry.probs);
        } catch (const std::exception &e) {
#pragma omp critical(stochlog_cache_error)
            if (error.empty())
                error = e.what();
        }
    }
    if (!error.empty()) {
        for (auto *p : todo)
            entries_.erase(p->first);
        throw ModelError(error);
    }
}

LeafValues leaf_values(const ParamStore &params, NeuralCache &cache, const Circuit &c) {
    const Program &program = params.program();
    LeafValues env;
    env.weight.reserve(c.weight_leaves().size());
    std::map<std::size_t, std::vector<double>> group_probs;
    for (const auto &w : c.weight_leaves()) {
        const RuleGroup &group = program.groups()[w.group];
        if (group.kind == GroupKind::Trainable) {
            auto it = group_probs.find(w.group);
            if (it == group_probs.end())
                it = group_probs.emplace(w.group, params.group_probabilities(w.group)).first;
            env.weight.push_back(it->second[w.slot]);
        } else {
            env.weight.push_back(program.rules()[group.rules[w.slot]].probability);
        }
    }
    env.neural.reserve(c.neural_leaves().size());
    for (const auto &n : c.neural_leaves())
        env.neural.push_back(cache.get(n.model, n.inputs)[n.output]);
    return env;
}

void accumulate_gradients(const ParamStore &params, NeuralCache &cache, const Circuit &c,
                          const LeafGradients &leaf_grads, double scale, Gradients &out) {
    const Program &program = params.program();
    std::map<std::size_t, std::vector<double>> group_upstream;
    for (std::size_t i = 0; i < c.weight_leaves().size(); ++i) {
        const auto &w = c.weight_leaves()[i];
        if (program.groups()[w.group].kind != GroupKind::Trainable)
            continue;
        auto &u = group_upstream[w.group];
        u.resize(params.group_logits(w.group).size(), 0.0);
        u[w.slot] += scale * leaf_grads.weight[i];
    }
    for (const auto &[g, u] : group_upstream) {
        const auto p = params.group_probabilities(g);
        softmax_backward(p, u, out.groups[g]);
    }

    std::map<std::pair<Symbol, std::string>, std::pair<const NeuralRef *, std::vector<double>>> upstream;
    for (std::size_t i = 0; i < c.neural_leaves().size(); ++i) {
        const auto &n = c.neural_leaves()[i];
        auto &slot = upstream[{n.model, input_key(n.inputs)}];
        if (!slot.first) {
            slot.first = &n;
            slot.second.assign(params.model(n.model).output_size(), 0.0);
        }
        slot.second[n.output] += scale * leaf_grads.neural[i];
    }
    for (const auto &[key, item] : upstream) {
        const Model &m = params.model(key.first);
        if (m.parameters().empty())
            continue;
        const auto &probs = cache.get(key.first, item.first->inputs);
        auto &grad = out.models[key.first];
        grad.resize(m.parameters().size(), 0.0);
        m.backward(item.first->inputs, probs, item.second, grad);
    }
}

// -------------------------------------------------------------------- factory

std::unique_ptr<Model> make_model(const std::string &name, const std::string &spec, std::size_t outputs,
                                  std::mt19937_64 &rng) {
    const auto parts = split(spec, ':');
    const std::string &kind = parts[0];
    if (kind == "softmax" && parts.size() == 1)
        return std::make_unique<SoftmaxTableModel>(name, outputs);
    if (kind == "dense" && (parts.size() == 2 || parts.size() == 3)) {
        const std::size_t in = parse_size(parts[1], "model " + name);
        const std::size_t hidden = parts.size() == 3 ? parse_size(parts[2], "model " + name) : 32;
        auto m = std::make_unique<DenseModel>(name, in, hidden, outputs);
        m->initialize(rng);
        return m;
    }
    if (kind == "fixed" && parts.size() <= 2) {
        auto m = std::make_unique<FixedTableModel>(name, outputs);
        if (parts.size() == 1) {
            m->set_default(std::vector<double>(outputs, 1.0 / static_cast<double>(outputs)));
            return m;
        }
        std::ifstream in(parts[1]);
        if (!in)
            throw ModelError("cannot open " + parts[1]);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty() || trim(line)[0] == '#')
                continue;
            auto fields = split(line, ',');
            if (fields.size() < outputs + 1)
                throw ModelError("model " + name + ": table row '" + line + "' has too few fields");
            std::vector<double> row;
            for (std::size_t i = fields.size() - outputs; i < fields.size(); ++i)
                row.push_back(parse_vector(fields[i], "model " + name).at(0));
            std::string key;
            for (std::size_t i = 0; i + outputs < fields.size(); ++i)
                key += (i ? "," : "") + trim(fields[i]);
            if (key == "*")
                m->set_default(std::move(row));
            else
                m->set_row(key, std::move(row));
        }
        return m;
    }
    throw ModelError("model " + name + ": unknown specification '" + spec + "'");
}

} // namespace stochlog
