#include "pose_ba/io.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace pose_ba::io {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message)
{
    throw ValidationError(path + ": " + message);
}

const json& field(const json& obj, const std::string& key, const std::string& path)
{
    if (!obj.is_object()) {
        fail(path, "expected an object");
    }
    const auto it = obj.find(key);
    if (it == obj.end()) {
        fail(path, "missing required field '" + key + "'");
    }
    return *it;
}

std::string child(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i)
{
    return path + "[" + std::to_string(i) + "]";
}

double number(const json& v, const std::string& path)
{
    if (!v.is_number()) {
        fail(path, "expected a number");
    }
    return v.get<double>();
}

const json& array(const json& v, const std::string& path, std::size_t expected = std::string::npos)
{
    if (!v.is_array()) {
        fail(path, "expected an array");
    }
    if (expected != std::string::npos && v.size() != expected) {
        fail(path, "expected " + std::to_string(expected) + " entries, found " + std::to_string(v.size()));
    }
    return v;
}

Eigen::VectorXd vector(const json& v, const std::string& path, std::size_t expected = std::string::npos)
{
    const auto& a = array(v, path, expected);
    Eigen::VectorXd out(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = number(a[i], index(path, i));
    }
    return out;
}

template <int Cols>
Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor> rows_matrix(const json& v, const std::string& path,
                                                                          std::size_t rows)
{
    const auto& a = array(v, path, rows);
    Eigen::Matrix<double, Eigen::Dynamic, Cols, Eigen::RowMajor> out(static_cast<Eigen::Index>(a.size()), Cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = vector(a[i], index(path, i), Cols).transpose();
    }
    return out;
}

template <typename Derived>
json to_array(const Eigen::DenseBase<Derived>& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v.derived().coeff(i));
    }
    return out;
}

template <typename Derived>
json rows_to_array(const Eigen::DenseBase<Derived>& m)
{
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m.derived().coeff(r, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

json finite_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

// Applies known keys from a flat object; rejects unknown ones.
void apply_fields(const json& doc, const std::string& what,
                  const std::map<std::string, std::function<void(const json&, const std::string&)>>& setters)
{
    if (!doc.is_object()) {
        fail(what, "expected an object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (key == "description") {
            continue;
        }
        const auto it = setters.find(key);
        if (it == setters.end()) {
            fail(child(what, key), "unknown field");
        }
        it->second(value, child(what, key));
    }
}

bool boolean(const json& v, const std::string& path)
{
    if (!v.is_boolean()) {
        fail(path, "expected true or false");
    }
    return v.get<bool>();
}

int integer(const json& v, const std::string& path)
{
    if (!v.is_number_integer()) {
        fail(path, "expected an integer");
    }
    return v.get<int>();
}

PersonEstimate estimate_from_json(const json& doc, int joint_count, const std::string& path)
{
    PersonEstimate e;
    e.beta = vector(field(doc, "beta", path), child(path, "beta"), kShapeDim);
    e.theta = vector(field(doc, "theta", path), child(path, "theta"), static_cast<std::size_t>(3 * joint_count));
    e.camera = camera_from_json(field(doc, "camera", path), child(path, "camera"));
    return e;
}

json estimate_to_json(const PersonEstimate& e)
{
    return {{"beta", to_array(e.beta)}, {"theta", to_array(e.theta)}, {"camera", to_json(e.camera)}};
}

} // namespace

json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(path.string() + ": cannot open file");
    }
    try {
        return json::parse(in);
    }
    catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ValidationError(tmp.string() + ": cannot open for writing");
        }
        out << text;
        if (!out) {
            throw ValidationError(tmp.string() + ": write failed");
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_json_atomic(const std::filesystem::path& path, const json& doc)
{
    write_text_atomic(path, doc.dump(2) + "\n");
}

// ------------------------------------------------------------ body model ---

BodyModel body_model_from_json(const json& doc)
{
    const auto& parents_doc = array(field(doc, "parents", ""), "parents");
    const auto joints = parents_doc.size();
    std::vector<int> parents;
    for (std::size_t i = 0; i < joints; ++i) {
        parents.push_back(integer(parents_doc[i], index("parents", i)));
    }
    const Joints3 offsets = rows_matrix<3>(field(doc, "rest_offsets", ""), "rest_offsets", joints);
    const auto& basis_doc = array(field(doc, "shape_basis", ""), "shape_basis", joints);
    std::vector<ShapeBasis> basis;
    for (std::size_t i = 0; i < joints; ++i) {
        const auto path = index("shape_basis", i);
        const auto& rows = array(basis_doc[i], path, 3);
        ShapeBasis b;
        for (std::size_t r = 0; r < 3; ++r) {
            b.row(static_cast<Eigen::Index>(r)) = vector(rows[r], index(path, r), kShapeDim).transpose();
        }
        basis.push_back(b);
    }
    return BodyModel(std::move(parents), offsets, std::move(basis));
}

json to_json(const BodyModel& model)
{
    json basis = json::array();
    for (const auto& b : model.shape_basis()) {
        basis.push_back(rows_to_array(b));
    }
    return {{"parents", model.parents()}, {"rest_offsets", rows_to_array(model.rest_offsets())}, {"shape_basis", basis}};
}

BodyModel load_body_model(const std::filesystem::path& path)
{
    const json doc = read_json(path);
    try {
        return body_model_from_json(doc);
    }
    catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

// ------------------------------------------------------------------- gmm ---

GmmPrior gmm_from_json(const json& doc)
{
    const Eigen::VectorXd weights = vector(field(doc, "weights", ""), "weights");
    const auto k = static_cast<std::size_t>(weights.size());
    const auto& means_doc = array(field(doc, "means", ""), "means", k);
    const auto& chol_doc = array(field(doc, "covariances_cholesky", ""), "covariances_cholesky", k);
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> chol;
    for (std::size_t i = 0; i < k; ++i) {
        means.push_back(vector(means_doc[i], index("means", i)));
        const auto d = static_cast<std::size_t>(means.back().size());
        const auto path = index("covariances_cholesky", i);
        const auto& rows = array(chol_doc[i], path, d);
        Eigen::MatrixXd l(means.back().size(), means.back().size());
        for (std::size_t r = 0; r < d; ++r) {
            l.row(static_cast<Eigen::Index>(r)) = vector(rows[r], index(path, r), d).transpose();
        }
        chol.push_back(std::move(l));
    }
    return GmmPrior(weights, std::move(means), std::move(chol));
}

json to_json(const GmmPrior& prior)
{
    json means = json::array();
    json chol = json::array();
    for (int i = 0; i < prior.components(); ++i) {
        means.push_back(to_array(prior.means()[static_cast<std::size_t>(i)]));
        chol.push_back(rows_to_array(prior.cholesky()[static_cast<std::size_t>(i)]));
    }
    return {{"weights", to_array(prior.weights())}, {"means", means}, {"covariances_cholesky", chol}};
}

GmmPrior load_gmm(const std::filesystem::path& path)
{
    const json doc = read_json(path);
    try {
        return gmm_from_json(doc);
    }
    catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

// --------------------------------------------------------------- configs ---

EnergyConfig energy_config_from_json(const json& doc, EnergyConfig c)
{
    auto num = [](double& target) {
        return [&target](const json& v, const std::string& p) { target = number(v, p); };
    };
    auto flag = [](bool& target) {
        return [&target](const json& v, const std::string& p) { target = boolean(v, p); };
    };
    apply_fields(doc, "energy",
                 {{"lambda_R", num(c.lambda_R)},
                  {"lambda_I", num(c.lambda_I)},
                  {"lambda_beta", num(c.lambda_beta)},
                  {"lambda_J", num(c.lambda_J)},
                  {"lambda_1", num(c.lambda_1)},
                  {"lambda_2", num(c.lambda_2)},
                  {"lambda_3", num(c.lambda_3)},
                  {"tau_R", num(c.tau_R)},
                  {"tau_I", num(c.tau_I)},
                  {"huber_delta", num(c.huber_delta)},
                  {"hinge_margin", num(c.hinge_margin)},
                  {"robust_mode", flag(c.robust_mode)},
                  {"camera_translation_bound_fraction", num(c.camera_translation_bound_fraction)},
                  {"penalize_camera_scale", flag(c.penalize_camera_scale)},
                  {"image_width", num(c.image_width)}});
    // image_width 0 means "from the sequence"; check everything else now
    EnergyConfig probe = c;
    if (probe.image_width == 0.0) {
        probe.image_width = 1.0;
    }
    probe.validate();
    return c;
}

json to_json(const EnergyConfig& c)
{
    return {{"lambda_R", c.lambda_R},
            {"lambda_I", c.lambda_I},
            {"lambda_beta", c.lambda_beta},
            {"lambda_J", c.lambda_J},
            {"lambda_1", c.lambda_1},
            {"lambda_2", c.lambda_2},
            {"lambda_3", c.lambda_3},
            {"tau_R", c.tau_R},
            {"tau_I", c.tau_I},
            {"huber_delta", c.huber_delta},
            {"hinge_margin", c.hinge_margin},
            {"robust_mode", c.robust_mode},
            {"camera_translation_bound_fraction", c.camera_translation_bound_fraction},
            {"penalize_camera_scale", c.penalize_camera_scale},
            {"image_width", c.image_width}};
}

SolverConfig solver_config_from_json(const json& doc, SolverConfig c)
{
    auto num = [](double& target) {
        return [&target](const json& v, const std::string& p) { target = number(v, p); };
    };
    auto whole = [](int& target) {
        return [&target](const json& v, const std::string& p) { target = integer(v, p); };
    };
    apply_fields(doc, "solver",
                 {{"max_iterations", whole(c.max_iterations)},
                  {"memory", whole(c.memory)},
                  {"gradient_tolerance", num(c.gradient_tolerance)},
                  {"function_tolerance", num(c.function_tolerance)},
                  {"c1", num(c.c1)},
                  {"c2", num(c.c2)},
                  {"max_line_search_steps", whole(c.max_line_search_steps)}});
    c.validate();
    return c;
}

json to_json(const SolverConfig& c)
{
    return {{"max_iterations", c.max_iterations},
            {"memory", c.memory},
            {"gradient_tolerance", c.gradient_tolerance},
            {"function_tolerance", c.function_tolerance},
            {"c1", c.c1},
            {"c2", c.c2},
            {"max_line_search_steps", c.max_line_search_steps}};
}

SynthConfig synth_config_from_json(const json& doc)
{
    SynthConfig c;
    auto num = [](double& target) {
        return [&target](const json& v, const std::string& p) { target = number(v, p); };
    };
    apply_fields(doc, "synth",
                 {{"video_id",
                   [&c](const json& v, const std::string& p) {
                       if (!v.is_string()) {
                           fail(p, "expected a string");
                       }
                       c.video_id = v.get<std::string>();
                   }},
                  {"frames", [&c](const json& v, const std::string& p) { c.frames = integer(v, p); }},
                  {"people", [&c](const json& v, const std::string& p) { c.people = integer(v, p); }},
                  {"detection_noise", num(c.detection_noise)},
                  {"outlier_rate", num(c.outlier_rate)},
                  {"miss_rate", num(c.miss_rate)},
                  {"init_theta_noise", num(c.init_theta_noise)},
                  {"init_beta_noise", num(c.init_beta_noise)},
                  {"init_camera_noise", num(c.init_camera_noise)},
                  {"motion_amplitude", num(c.motion_amplitude)},
                  {"camera_motion", num(c.camera_motion)},
                  {"distractor_offset", num(c.distractor_offset)},
                  {"image_width", num(c.image_width)},
                  {"image_height", num(c.image_height)},
                  {"seed",
                   [&c](const json& v, const std::string& p) {
                       if (!v.is_number_integer() || v.get<long long>() < 0) {
                           fail(p, "expected a non-negative integer");
                       }
                       c.seed = v.get<unsigned>();
                   }}});
    c.validate();
    return c;
}

json to_json(const SynthConfig& c)
{
    return {{"video_id", c.video_id},
            {"frames", c.frames},
            {"people", c.people},
            {"detection_noise", c.detection_noise},
            {"outlier_rate", c.outlier_rate},
            {"miss_rate", c.miss_rate},
            {"init_theta_noise", c.init_theta_noise},
            {"init_beta_noise", c.init_beta_noise},
            {"init_camera_noise", c.init_camera_noise},
            {"motion_amplitude", c.motion_amplitude},
            {"camera_motion", c.camera_motion},
            {"distractor_offset", c.distractor_offset},
            {"image_width", c.image_width},
            {"image_height", c.image_height},
            {"seed", c.seed}};
}

// ------------------------------------------------------------- solutions ---

json to_json(const CameraParams& camera)
{
    return {{"scale", camera.scale}, {"translation", to_array(camera.translation)}};
}

CameraParams camera_from_json(const json& doc, const std::string& path)
{
    CameraParams c;
    c.scale = number(field(doc, "scale", path), child(path, "scale"));
    if (!(c.scale > 0.0)) {
        fail(child(path, "scale"), "must be positive");
    }
    c.translation = vector(field(doc, "translation", path), child(path, "translation"), 2);
    return c;
}

json to_json(const SequenceSolution& s)
{
    json thetas = json::array();
    json cameras = json::array();
    for (int t = 0; t < s.frame_count(); ++t) {
        thetas.push_back(to_array(s.thetas[static_cast<std::size_t>(t)]));
        cameras.push_back(to_json(s.cameras[static_cast<std::size_t>(t)]));
    }
    return {{"beta", to_array(s.beta)}, {"thetas", thetas}, {"cameras", cameras}};
}

SequenceSolution solution_from_json(const json& doc, int joint_count, const std::string& path)
{
    SequenceSolution s;
    s.beta = vector(field(doc, "beta", path), child(path, "beta"), kShapeDim);
    const auto& thetas = array(field(doc, "thetas", path), child(path, "thetas"));
    const auto& cameras = array(field(doc, "cameras", path), child(path, "cameras"), thetas.size());
    for (std::size_t t = 0; t < thetas.size(); ++t) {
        s.thetas.push_back(vector(thetas[t], index(child(path, "thetas"), t), static_cast<std::size_t>(3 * joint_count)));
        s.cameras.push_back(camera_from_json(cameras[t], index(child(path, "cameras"), t)));
    }
    if (s.thetas.empty()) {
        fail(child(path, "thetas"), "at least one frame is required");
    }
    return s;
}

json to_json(const Track& track)
{
    return track.selection;
}

Track track_from_json(const json& doc, double skip_penalty)
{
    const auto& a = array(doc, "track");
    Track t;
    t.skip_penalty = skip_penalty;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int v = integer(a[i], index("track", i));
        if (v < kSkip) {
            fail(index("track", i), "person index must be >= -1");
        }
        t.selection.push_back(v);
    }
    return t;
}

json to_json(const SolveReport& r, bool include_timing)
{
    json doc = {{"iterations", r.iterations},
                {"evaluations", r.evaluations},
                {"initial_energy", r.initial_energy},
                {"final_energy", r.final_energy},
                {"final_gradient_norm", r.final_gradient_norm},
                {"termination", to_string(r.termination)}};
    if (include_timing) {
        doc["wall_seconds"] = r.wall_seconds;
    }
    return doc;
}

// -------------------------------------------------------------- sequence ---

json to_json(const SequenceFile& seq)
{
    json frames = json::array();
    for (const auto& f : seq.frames) {
        json people = json::array();
        for (const auto& det : f.people) {
            people.push_back({{"keypoints", rows_to_array(det.keypoints)}, {"confidence", to_array(det.confidence)}});
        }
        frames.push_back({{"people", people}});
    }
    json doc = {{"video_id", seq.video_id},
                {"image_width", seq.image_width},
                {"image_height", seq.image_height},
                {"frames", frames}};
    if (seq.estimates) {
        json est = json::array();
        for (const auto& frame : *seq.estimates) {
            json row = json::array();
            for (const auto& e : frame) {
                row.push_back(estimate_to_json(e));
            }
            est.push_back(std::move(row));
        }
        doc["initial_estimates"] = std::move(est);
    }
    if (seq.ground_truth) {
        const auto& gt = *seq.ground_truth;
        json joints = json::array();
        for (const auto& j : gt.joints) {
            joints.push_back(rows_to_array(j));
        }
        json g = {{"joints", joints}};
        if (!gt.thetas.empty()) {
            SequenceSolution s{gt.beta, gt.thetas, gt.cameras};
            g.update(to_json(s));
        }
        doc["ground_truth"] = std::move(g);
    }
    return doc;
}

SequenceFile sequence_from_json(const json& doc, int joint_count)
{
    SequenceFile seq;
    const auto& id = field(doc, "video_id", "");
    if (!id.is_string()) {
        fail("video_id", "expected a string");
    }
    seq.video_id = id.get<std::string>();
    seq.image_width = number(field(doc, "image_width", ""), "image_width");
    seq.image_height = number(field(doc, "image_height", ""), "image_height");
    const auto& frames = array(field(doc, "frames", ""), "frames");
    const auto joints = static_cast<std::size_t>(joint_count);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto fpath = index("frames", t);
        const auto& people = array(field(frames[t], "people", fpath), child(fpath, "people"));
        FrameDetections fd;
        for (std::size_t p = 0; p < people.size(); ++p) {
            const auto ppath = index(child(fpath, "people"), p);
            Detection det;
            det.keypoints = rows_matrix<2>(field(people[p], "keypoints", ppath), child(ppath, "keypoints"), joints);
            det.confidence = vector(field(people[p], "confidence", ppath), child(ppath, "confidence"), joints);
            fd.people.push_back(std::move(det));
        }
        seq.frames.push_back(std::move(fd));
    }
    if (const auto it = doc.find("initial_estimates"); it != doc.end()) {
        const auto& est = array(*it, "initial_estimates");
        std::vector<std::vector<PersonEstimate>> all;
        for (std::size_t t = 0; t < est.size(); ++t) {
            const auto fpath = index("initial_estimates", t);
            const auto& row = array(est[t], fpath);
            std::vector<PersonEstimate> frame;
            for (std::size_t p = 0; p < row.size(); ++p) {
                frame.push_back(estimate_from_json(row[p], joint_count, index(fpath, p)));
            }
            all.push_back(std::move(frame));
        }
        seq.estimates = std::move(all);
    }
    if (const auto it = doc.find("ground_truth"); it != doc.end()) {
        GroundTruth gt;
        const auto& joints_doc = array(field(*it, "joints", "ground_truth"), "ground_truth.joints");
        for (std::size_t t = 0; t < joints_doc.size(); ++t) {
            gt.joints.push_back(rows_matrix<3>(joints_doc[t], index("ground_truth.joints", t), joints));
        }
        if (it->contains("thetas")) {
            auto s = solution_from_json(*it, joint_count, "ground_truth");
            gt.beta = s.beta;
            gt.thetas = std::move(s.thetas);
            gt.cameras = std::move(s.cameras);
        }
        seq.ground_truth = std::move(gt);
    }
    seq.validate(joint_count);
    return seq;
}

SequenceFile load_sequence(const std::filesystem::path& path, int joint_count)
{
    const json doc = read_json(path);
    try {
        return sequence_from_json(doc, joint_count);
    }
    catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void save_sequence(const std::filesystem::path& path, const SequenceFile& sequence)
{
    write_json_atomic(path, to_json(sequence));
}

json to_json(const SequenceMetrics& m)
{
    return {{"mpjpe_mm", to_array(Eigen::Map<const Eigen::VectorXd>(m.mpjpe.data(), static_cast<Eigen::Index>(m.mpjpe.size())))},
            {"pa_mpjpe_mm",
             to_array(Eigen::Map<const Eigen::VectorXd>(m.pa_mpjpe.data(), static_cast<Eigen::Index>(m.pa_mpjpe.size())))},
            {"mean_mpjpe_mm", m.mean_mpjpe},
            {"mean_pa_mpjpe_mm", m.mean_pa_mpjpe}};
}

json result_to_json(const std::string& video_id, const PipelineResult& r, bool include_timing)
{
    json doc = {{"video_id", video_id},
                {"frame_count", r.solution.frame_count()},
                {"solution", to_json(r.solution)},
                {"report", to_json(r.report, include_timing)},
                {"energy",
                 {{"total", r.energy.total()},
                  {"reprojection", r.energy.reprojection},
                  {"temporal", r.energy.temporal},
                  {"joint_prior", r.energy.joint_prior},
                  {"init_prior", r.energy.init_prior}}},
                {"normalized_energy", finite_or_null(r.normalized_energy)},
                {"selected", r.selected},
                {"track", to_json(r.track)},
                {"inlier_frames", json(std::vector<int>(r.inlier_frames.begin(), r.inlier_frames.end()))}};
    if (r.init_metrics && r.solution_metrics) {
        doc["metrics"] = {{"initial", to_json(*r.init_metrics)}, {"solution", to_json(*r.solution_metrics)}};
    }
    return doc;
}

void save_solution(const std::filesystem::path& path, const std::string& video_id, const PipelineResult& result,
                   bool include_timing)
{
    write_json_atomic(path, result_to_json(video_id, result, include_timing));
}

std::string metrics_csv(const SequenceMetrics& m)
{
    std::ostringstream out;
    out.precision(17);
    out << "frame,mpjpe_mm,pa_mpjpe_mm\n";
    for (std::size_t t = 0; t < m.mpjpe.size(); ++t) {
        out << t << ',' << m.mpjpe[t] << ',' << m.pa_mpjpe[t] << '\n';
    }
    out << "mean," << m.mean_mpjpe << ',' << m.mean_pa_mpjpe << '\n';
    return out.str();
}

} // namespace pose_ba::io
