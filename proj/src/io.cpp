#include "vpursuit/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vpursuit/errors.hpp"

namespace vpursuit {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        throw ConfigError(where + ": expected an object");
    }
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& item : j.items()) {
        if (!keys.contains(item.key())) {
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) {
        throw ConfigError(where + ": expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw ConfigError(where + ": value is not finite");
    }
    return v;
}

long integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) {
        throw ConfigError(where + ": expected an integer");
    }
    return j.get<long>();
}

template <int N>
Eigen::Matrix<double, N, 1> vector(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != N) {
        throw ConfigError(where + ": expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) {
        v(i) = number(j[static_cast<std::size_t>(i)], where);
    }
    return v;
}

// A scalar broadcasts to all six entries.
Vec6 vec6_or_scalar(const json& j, const std::string& where) {
    if (j.is_number()) {
        return Vec6::Constant(number(j, where));
    }
    return vector<6>(j, where);
}

Mat6 gain(const json& j, const std::string& where) {
    if (j.is_array() && j.size() == 6 && j[0].is_array()) {
        Mat6 K;
        for (int r = 0; r < 6; ++r) {
            K.row(r) = vector<6>(j[static_cast<std::size_t>(r)], where).transpose();
        }
        return K;
    }
    if (j.is_number() || (j.is_array() && j.size() == 6)) {
        return vec6_or_scalar(j, where).asDiagonal();
    }
    throw ConfigError(where + ": expected a scalar, a 6-vector diagonal or a 6x6 matrix");
}

Pose pose(const json& j, const std::string& where) {
    check_keys(j, where, {"position", "axis_angle"});
    const Vec3 p = j.contains("position") ? vector<3>(j["position"], where + ".position") : Vec3::Zero();
    const Vec3 r = j.contains("axis_angle") ? vector<3>(j["axis_angle"], where + ".axis_angle") : Vec3::Zero();
    return Pose::from_vector_form(p, r);
}

fs::path resolve(const fs::path& base, const json& j, const std::string& where) {
    if (!j.is_string()) {
        throw ConfigError(where + ": expected a path string");
    }
    fs::path p = j.get<std::string>();
    return p.is_absolute() ? p : base / p;
}

ProfilePtr profile(const json& j, const std::string& where, const fs::path& base) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw ConfigError(where + ": profile needs a string 'type'");
    }
    const std::string type = j["type"].get<std::string>();
    if (type == "vanderpol") {
        check_keys(j, where, {"type", "eta", "v"});
        if (!j.contains("eta") || !j.contains("v")) {
            throw ConfigError(where + ": vanderpol profile needs 'eta' and 'v'");
        }
        return std::make_shared<VanDerPolProfile>(number(j["eta"], where + ".eta"), number(j["v"], where + ".v"));
    }
    if (type == "stationary") {
        check_keys(j, where, {"type"});
        return std::make_shared<StationaryProfile>();
    }
    if (type == "tabulated") {
        check_keys(j, where, {"type", "file"});
        if (!j.contains("file")) {
            throw ConfigError(where + ": tabulated profile needs 'file'");
        }
        try {
            return std::make_shared<TabulatedProfile>(TabulatedProfile::load_csv(resolve(base, j["file"], where)));
        } catch (const InvalidArgument& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    throw ConfigError(where + ": unknown profile type '" + type + "'");
}

Trigger trigger(const json& j, const std::string& where) {
    check_keys(j, where, {"type", "time", "position", "tolerance", "rearm_radius", "profile"});
    Trigger t;
    const std::string type = j.value("type", std::string("position"));
    if (type == "time") {
        t.kind = Trigger::Kind::Time;
        if (!j.contains("time")) {
            throw ConfigError(where + ": time trigger needs 'time'");
        }
        t.time = number(j["time"], where + ".time");
    } else if (type == "position") {
        t.kind = Trigger::Kind::Position;
        if (!j.contains("position")) {
            throw ConfigError(where + ": position trigger needs 'position'");
        }
        t.position = vector<3>(j["position"], where + ".position");
    } else {
        throw ConfigError(where + ": unknown trigger type '" + type + "'");
    }
    if (j.contains("tolerance")) {
        t.tolerance = number(j["tolerance"], where + ".tolerance");
    }
    if (j.contains("rearm_radius")) {
        t.rearm_radius = number(j["rearm_radius"], where + ".rearm_radius");
    }
    if (!j.contains("profile")) {
        throw ConfigError(where + ": trigger needs 'profile'");
    }
    t.profile = static_cast<int>(integer(j["profile"], where + ".profile"));
    return t;
}

std::string read_file(const fs::path& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingArtifact("cannot open " + what + " " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << text;
}

json to_json(const Vec6& v) { return json(std::vector<double>(v.data(), v.data() + 6)); }

Vec6 vec6_from(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 6) {
        throw InvalidArgument(where + ": expected 6 numbers");
    }
    Vec6 v;
    for (int i = 0; i < 6; ++i) {
        v(i) = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

}  // namespace

Config parse_config(const std::string& text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "config",
               {"dt", "duration", "seed", "case", "threshold", "alpha", "transient", "use_gp", "pixel_noise_std",
                "target_substeps", "on_violation", "poses", "gains", "profiles", "schedule", "features", "bounds",
                "training", "domain", "models", "datasets"});
    Config cfg;
    Scenario& s = cfg.scenario;
    s = Scenario::nominal();
    try {
        if (j.contains("dt")) s.dt = number(j["dt"], "dt");
        if (j.contains("duration")) s.duration = number(j["duration"], "duration");
        if (j.contains("seed")) {
            const long seed = integer(j["seed"], "seed");
            if (seed < 0) {
                throw ConfigError("seed must be non-negative");
            }
            s.seed = static_cast<std::uint64_t>(seed);
        }
        if (j.contains("case")) {
            if (!j["case"].is_string()) throw ConfigError("case: expected a string");
            s.pursuit_case = parse_case(j["case"].get<std::string>());
        }
        if (j.contains("threshold")) s.threshold = number(j["threshold"], "threshold");
        if (j.contains("alpha")) s.alpha = vector<6>(j["alpha"], "alpha");
        if (j.contains("transient")) s.transient = number(j["transient"], "transient");
        if (j.contains("use_gp")) {
            if (!j["use_gp"].is_boolean()) throw ConfigError("use_gp: expected a boolean");
            s.use_gp = j["use_gp"].get<bool>();
        }
        if (j.contains("pixel_noise_std")) s.pixel_noise_std = number(j["pixel_noise_std"], "pixel_noise_std");
        if (j.contains("target_substeps")) {
            s.target_substeps = static_cast<int>(integer(j["target_substeps"], "target_substeps"));
        }
        if (j.contains("on_violation")) {
            const std::string p = j["on_violation"].is_string() ? j["on_violation"].get<std::string>() : "";
            if (p == "continue") {
                s.on_violation = ViolationPolicy::Continue;
            } else if (p == "abort") {
                s.on_violation = ViolationPolicy::Abort;
            } else {
                throw ConfigError("on_violation: expected 'continue' or 'abort'");
            }
        }
        if (j.contains("poses")) {
            const json& p = j["poses"];
            check_keys(p, "poses", {"g_wo", "g_wc", "g_bar_co", "g_d"});
            if (p.contains("g_wo")) s.g_wo0 = pose(p["g_wo"], "poses.g_wo");
            if (p.contains("g_wc")) s.g_wc0 = pose(p["g_wc"], "poses.g_wc");
            if (p.contains("g_bar_co")) s.g_bar_co0 = pose(p["g_bar_co"], "poses.g_bar_co");
            if (p.contains("g_d")) s.g_d = pose(p["g_d"], "poses.g_d");
        }
        if (j.contains("gains")) {
            const json& g = j["gains"];
            check_keys(g, "gains", {"k_c", "k_e"});
            if (g.contains("k_c")) s.gains.k_c = gain(g["k_c"], "gains.k_c");
            if (g.contains("k_e")) s.gains.k_e = gain(g["k_e"], "gains.k_e");
        }
        if (j.contains("profiles")) {
            if (!j["profiles"].is_array()) throw ConfigError("profiles: expected an array");
            s.profiles.clear();
            for (std::size_t i = 0; i < j["profiles"].size(); ++i) {
                s.profiles.push_back(profile(j["profiles"][i], "profiles[" + std::to_string(i) + "]", base_dir));
            }
            // A custom profile list without a schedule starts in profile 1 and never switches.
            if (!j.contains("schedule")) {
                s.schedule = SwitchSchedule{};
            }
        }
        if (j.contains("schedule")) {
            const json& sc = j["schedule"];
            check_keys(sc, "schedule", {"initial", "triggers"});
            s.schedule = SwitchSchedule{};
            if (sc.contains("initial")) {
                s.schedule.initial_profile = static_cast<int>(integer(sc["initial"], "schedule.initial"));
            }
            if (sc.contains("triggers")) {
                if (!sc["triggers"].is_array()) throw ConfigError("schedule.triggers: expected an array");
                for (std::size_t i = 0; i < sc["triggers"].size(); ++i) {
                    s.schedule.triggers.push_back(
                        trigger(sc["triggers"][i], "schedule.triggers[" + std::to_string(i) + "]"));
                }
            }
        }
        if (j.contains("features")) {
            const json& f = j["features"];
            check_keys(f, "features", {"focal_length", "points"});
            if (f.contains("focal_length")) s.features.focal_length = number(f["focal_length"], "features.focal_length");
            if (f.contains("points")) {
                if (!f["points"].is_array()) throw ConfigError("features.points: expected an array");
                s.features.points.clear();
                for (const auto& p : f["points"]) {
                    s.features.points.push_back(vector<3>(p, "features.points"));
                }
            }
        }
        if (j.contains("bounds")) {
            const json& b = j["bounds"];
            check_keys(b, "bounds", {"mode", "lambda_k", "lipschitz", "lipschitz_p", "lipschitz_theta", "delta", "rho_bar"});
            if (b.contains("mode")) {
                if (!b["mode"].is_string()) throw ConfigError("bounds.mode: expected a string");
                s.bounds.mode = parse_bound_mode(b["mode"].get<std::string>());
            }
            if (b.contains("lambda_k")) s.bounds.lambda_k = number(b["lambda_k"], "bounds.lambda_k");
            if (b.contains("lipschitz")) s.bounds.lipschitz = number(b["lipschitz"], "bounds.lipschitz");
            if (b.contains("lipschitz_p")) s.bounds.lipschitz_p = number(b["lipschitz_p"], "bounds.lipschitz_p");
            if (b.contains("lipschitz_theta")) {
                s.bounds.lipschitz_theta = number(b["lipschitz_theta"], "bounds.lipschitz_theta");
            }
            if (b.contains("delta")) s.bounds.delta = number(b["delta"], "bounds.delta");
            if (b.contains("rho_bar")) s.bounds.rho_bar = number(b["rho_bar"], "bounds.rho_bar");
        }
        if (j.contains("training")) {
            const json& t = j["training"];
            check_keys(t, "training", {"points_per_profile", "noise_std", "restarts", "max_evaluations"});
            if (t.contains("points_per_profile")) {
                s.training.points_per_profile =
                    static_cast<int>(integer(t["points_per_profile"], "training.points_per_profile"));
            }
            if (t.contains("noise_std")) s.training.noise_std = vec6_or_scalar(t["noise_std"], "training.noise_std");
            if (t.contains("restarts")) {
                s.training.fit.restarts = static_cast<int>(integer(t["restarts"], "training.restarts"));
            }
            if (t.contains("max_evaluations")) {
                s.training.fit.max_evaluations =
                    static_cast<int>(integer(t["max_evaluations"], "training.max_evaluations"));
            }
            if (s.training.fit.restarts < 1 || s.training.fit.max_evaluations < 1) {
                throw ConfigError("training: restarts and max_evaluations must be positive");
            }
            if (!(s.training.noise_std.array() >= 0.0).all()) {
                throw ConfigError("training.noise_std must be non-negative");
            }
        }
        if (j.contains("domain")) {
            const json& d = j["domain"];
            check_keys(d, "domain", {"x", "y"});
            if (d.contains("x")) {
                const auto x = vector<2>(d["x"], "domain.x");
                s.domain.x_min = x(0);
                s.domain.x_max = x(1);
            }
            if (d.contains("y")) {
                const auto y = vector<2>(d["y"], "domain.y");
                s.domain.y_min = y(0);
                s.domain.y_max = y(1);
            }
        }
        for (const char* key : {"models", "datasets"}) {
            if (!j.contains(key)) {
                continue;
            }
            if (!j[key].is_array()) throw ConfigError(std::string(key) + ": expected an array of paths");
            auto& dst = std::string(key) == "models" ? cfg.model_files : cfg.dataset_files;
            for (const auto& p : j[key]) {
                dst.push_back(resolve(base_dir, p, key));
            }
        }
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    s.validate();
    return cfg;
}

Config load_config(const fs::path& path) {
    return parse_config(read_file(path, "config"), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

void write_dataset_csv(const Dataset& data, const fs::path& path) {
    data.validate();
    std::string out = "px,py,pz,rx,ry,rz,vx,vy,vz,wx,wy,wz\n";
    for (Eigen::Index r = 0; r < data.size(); ++r) {
        for (int c = 0; c < 12; ++c) {
            const double v = c < 6 ? data.inputs(r, c) : data.outputs(r, c - 6);
            out += fmt::format("{}{}", c == 0 ? "" : ",", v);
        }
        out += '\n';
    }
    write_file(path, out);
}

Dataset read_dataset_csv(const fs::path& path) {
    std::istringstream in(read_file(path, "dataset"));
    std::string line;
    if (!std::getline(in, line) || line.rfind("px,py,pz", 0) != 0) {
        throw InvalidArgument("dataset " + path.string() + " lacks the expected header");
    }
    std::vector<std::array<double, 12>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        std::array<double, 12> vals{};
        for (double& v : vals) {
            if (!(row >> v)) {
                throw InvalidArgument("malformed dataset row in " + path.string());
            }
        }
        rows.push_back(vals);
    }
    Dataset data;
    data.inputs.resize(static_cast<Eigen::Index>(rows.size()), kGpDims);
    data.outputs.resize(static_cast<Eigen::Index>(rows.size()), kGpDims);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < 6; ++c) {
            data.inputs(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
            data.outputs(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c + 6)];
        }
    }
    data.validate();
    return data;
}

std::string model_to_json(const GpModel& model) {
    json j;
    j["format"] = "vpursuit-gp-model";
    j["version"] = 1;
    json outputs = json::array();
    for (int i = 0; i < kGpDims; ++i) {
        const Hyperparameters& hp = model.hyperparameters(i);
        outputs.push_back({{"lengthscales", to_json(hp.lengthscales)},
                           {"signal_std", hp.signal_std},
                           {"noise_std", hp.noise_std},
                           {"log_likelihood", model.log_marginal_likelihood(i)}});
    }
    j["outputs"] = outputs;
    j["beta"] = to_json(model.beta());
    j["delta"] = model.beta_delta();
    j["alpha"] = to_json(model.alpha());
    j["sigma_bar"] = model.sigma_bar();
    json inputs = json::array();
    json targets = json::array();
    const Dataset& d = model.dataset();
    for (Eigen::Index r = 0; r < d.size(); ++r) {
        inputs.push_back(to_json(d.inputs.row(r).transpose()));
        targets.push_back(to_json(d.outputs.row(r).transpose()));
    }
    j["dataset"] = {{"inputs", inputs}, {"outputs", targets}};
    return j.dump(2) + "\n";
}

GpModel model_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.value("format", std::string()) != "vpursuit-gp-model") {
            throw InvalidArgument("not a model file");
        }
        OutputHyperparameters hps;
        const json& outs = j.at("outputs");
        if (!outs.is_array() || outs.size() != kGpDims) {
            throw InvalidArgument("model file needs 6 output entries");
        }
        for (int i = 0; i < kGpDims; ++i) {
            const json& o = outs[static_cast<std::size_t>(i)];
            Hyperparameters& hp = hps[static_cast<std::size_t>(i)];
            hp.lengthscales = vec6_from(o.at("lengthscales"), "lengthscales");
            hp.signal_std = o.at("signal_std").get<double>();
            hp.noise_std = o.at("noise_std").get<double>();
            hp.validate();
        }
        const json& inputs = j.at("dataset").at("inputs");
        const json& targets = j.at("dataset").at("outputs");
        if (inputs.size() != targets.size()) {
            throw InvalidArgument("model dataset inputs and outputs differ in length");
        }
        Dataset d;
        d.inputs.resize(static_cast<Eigen::Index>(inputs.size()), kGpDims);
        d.outputs.resize(static_cast<Eigen::Index>(inputs.size()), kGpDims);
        for (std::size_t r = 0; r < inputs.size(); ++r) {
            d.inputs.row(static_cast<Eigen::Index>(r)) = vec6_from(inputs[r], "input").transpose();
            d.outputs.row(static_cast<Eigen::Index>(r)) = vec6_from(targets[r], "output").transpose();
        }
        GpModel model(std::move(d), hps);
        model.set_beta(vec6_from(j.at("beta"), "beta"), j.at("delta").get<double>());
        model.set_switching_weights(vec6_from(j.at("alpha"), "alpha"), j.at("sigma_bar").get<double>());
        return model;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed model file: ") + e.what());
    }
}

void write_model(const GpModel& model, const fs::path& path) { write_file(path, model_to_json(model)); }

GpModel read_model(const fs::path& path) {
    try {
        return model_from_json(read_file(path, "model"));
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

std::vector<std::string> trace_columns(std::size_t n_models) {
    std::vector<std::string> cols = {"t", "psi_true", "psi_est"};
    const char* pose_parts[] = {"px", "py", "pz", "rx", "ry", "rz"};
    const char* twist_parts[] = {"vx", "vy", "vz", "wx", "wy", "wz"};
    for (const char* pose_name : {"g_wo", "g_wc", "g_bar_co"}) {
        for (const char* p : pose_parts) {
            cols.push_back(std::string(pose_name) + "_" + p);
        }
    }
    for (const char* err : {"e_c", "e_e", "e_e_meas"}) {
        for (int i = 0; i < 6; ++i) {
            cols.push_back(std::string(err) + "_" + std::to_string(i));
        }
    }
    cols.push_back("e_norm");
    for (int i = 0; i < 12; ++i) {
        cols.push_back("nu_" + std::to_string(i));
    }
    for (const char* inp : {"u_c", "u_e"}) {
        for (const char* p : twist_parts) {
            cols.push_back(std::string(inp) + "_" + p);
        }
    }
    for (int i = 0; i < 6; ++i) {
        cols.push_back("var_" + std::to_string(i));
    }
    cols.insert(cols.end(), {"storage", "ellipse", "lambda_k"});
    for (std::size_t m = 0; m < n_models; ++m) {
        cols.push_back("unc_" + std::to_string(m + 1));
    }
    return cols;
}

void write_trace_csv(const Trace& trace, std::ostream& out) {
    std::size_t n_models = 0;
    for (const auto& r : trace.records) {
        n_models = std::max(n_models, r.uncertainties.size());
    }
    const auto cols = trace_columns(n_models);
    std::string buf;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        buf += (i == 0 ? "" : ",") + cols[i];
    }
    buf += '\n';
    auto put = [&buf](double v) { fmt::format_to(std::back_inserter(buf), ",{}", v); };
    auto put_vec = [&put](const auto& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            put(v(i));
        }
    };
    for (const auto& r : trace.records) {
        fmt::format_to(std::back_inserter(buf), "{},{},{}", r.t, r.psi_true, r.psi_est);
        put_vec(r.g_wo.vector_form());
        put_vec(r.g_wc.vector_form());
        put_vec(r.g_bar_co.vector_form());
        put_vec(r.e_c);
        put_vec(r.e_e);
        put_vec(r.e_e_measured);
        put(r.e_norm);
        put_vec(r.nu);
        put_vec(r.u);
        put_vec(r.variance);
        put(r.storage);
        put(r.ellipse);
        put(r.lambda_k);
        for (std::size_t m = 0; m < n_models; ++m) {
            if (m < r.uncertainties.size()) {
                put(r.uncertainties[m]);
            } else {
                buf += ',';
            }
        }
        buf += '\n';
    }
    out << buf;
}

void write_trace_csv(const Trace& trace, const fs::path& path) {
    std::ostringstream os;
    write_trace_csv(trace, os);
    write_file(path, os.str());
}

std::string summary_json(const Trace& trace, const Scenario& scenario) {
    json j;
    j["case"] = to_string(trace.pursuit_case);
    j["seed"] = trace.seed;
    j["dt"] = trace.dt;
    j["records"] = trace.records.size();
    j["aborted"] = trace.aborted;
    j["mse"] = trace.records.empty() ? 0.0 : mse(trace);
    if (!trace.records.empty()) {
        j["final_error_norm"] = trace.records.back().e_norm;
    }
    auto events_json = [](const std::vector<SwitchEvent>& ev) {
        json a = json::array();
        for (const auto& e : ev) {
            a.push_back({{"t", e.t}, {"from", e.from}, {"to", e.to}});
        }
        return a;
    };
    j["true_switches"] = events_json(true_switches(trace));
    j["estimated_switches"] = events_json(estimated_switches(trace));
    const SwitchingFidelity f = evaluate_switching(trace, 1.0, scenario.transient);
    j["switching"] = {{"true_switches", f.true_switches},
                      {"matched", f.matched},
                      {"spurious", f.spurious},
                      {"min_dwell_steps", f.min_dwell_steps},
                      {"max_detection_delay", f.max_detection_delay}};
    if (!trace.records.empty()) {
        const BoundReport b = bound_report(trace, scenario.bounds, scenario.transient);
        json br = {{"mode", to_string(scenario.bounds.mode)},
                   {"precondition_violated", b.precondition_violated},
                   {"lambda_tilde", b.lambda_tilde},
                   {"lambda_k_min_observed", b.lambda_k_min_observed}};
        if (b.precondition_violated) {
            br["message"] = b.message;
        } else {
            br["entry_time"] = b.entry_time ? json(*b.entry_time) : json(nullptr);
            br["inside_fraction_post_entry"] = b.inside_fraction_post_entry;
            br["inside_fraction_post_transient"] = b.inside_fraction_post_transient;
            br["max_error_post_transient"] = b.max_error_post_transient;
        }
        j["bound_report"] = br;
    }
    json ev = json::array();
    for (const auto& e : trace.events) {
        ev.push_back({{"t", e.t}, {"kind", e.kind}, {"message", e.message}});
    }
    j["events"] = ev;
    return j.dump(2) + "\n";
}

}  // namespace vpursuit
