#include "tfpick/io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace tfpick::io {

using nlohmann::json;
using testfns::NodeSet;
using testfns::Point;
using testfns::TestFamily;

namespace {

Complex parse_complex(const json& j, const std::string& what) {
    if (j.is_number()) return Complex(j.get<double>(), 0.0);
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return Complex(j[0].get<double>(), j[1].get<double>());
    throw InputError(what + ": expected a number or an [re, im] pair");
}

Point parse_point(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty())
        throw InputError(what + ": expected a non-empty list of coordinates");
    Point p(static_cast<Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i)
        p(static_cast<Index>(i)) =
            parse_complex(j[i], what + ", coordinate " + std::to_string(i));
    return p;
}

TestFamily parse_family(const json& j, const CliOverrides& overrides) {
    if (j.contains("tabulated")) {
        const json& t = j["tabulated"];
        if (!t.contains("labels") || !t.contains("points") || !t.contains("values"))
            throw InputError("family.tabulated needs labels, points, values");
        std::vector<std::string> labels = t["labels"].get<std::vector<std::string>>();
        std::vector<Point> points;
        for (size_t i = 0; i < t["points"].size(); ++i)
            points.push_back(parse_point(t["points"][i],
                                         "family.tabulated.points[" + std::to_string(i) + "]"));
        CMatrix values(static_cast<Index>(labels.size()), static_cast<Index>(points.size()));
        const json& rows = t["values"];
        if (rows.size() != labels.size())
            throw InputError("family.tabulated.values: one row per label required");
        for (size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != points.size())
                throw InputError("family.tabulated.values: one entry per point required");
            for (size_t c = 0; c < points.size(); ++c)
                values(static_cast<Index>(r), static_cast<Index>(c)) = parse_complex(
                    rows[r][c], "family.tabulated.values[" + std::to_string(r) + "]");
        }
        return testfns::tabulated_family(std::move(labels), std::move(points), values);
    }
    if (!j.contains("name") || !j["name"].is_string())
        throw InputError("family: expected a name or a tabulated block");
    testfns::FamilyParams p;
    if (j.contains("params")) {
        const json& q = j["params"];
        if (q.contains("dim")) p.dim = q["dim"].get<Index>();
        if (q.contains("n_max")) p.n_max = q["n_max"].get<Index>();
        if (q.contains("q")) p.q = q["q"].get<double>();
        if (q.contains("b")) p.b = parse_complex(q["b"], "family.params.b");
        if (q.contains("grid")) p.grid = q["grid"].get<Index>();
        if (q.contains("cutoff")) p.cutoff = q["cutoff"].get<Index>();
        if (q.contains("truncation")) p.truncation = q["truncation"].get<int>();
    }
    if (overrides.grid) p.grid = *overrides.grid;
    return testfns::builtin_family(j["name"].get<std::string>(), p);
}

std::string format_line_context(const json& j) { return j.dump(); }

}  // namespace

Problem parse_problem(const std::string& text, const CliOverrides& overrides) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("problem file: invalid JSON: ") + e.what());
    }
    if (!j.contains("family")) throw InputError("problem file: missing 'family'");
    if (!j.contains("nodes")) throw InputError("problem file: missing 'nodes'");

    TestFamily family = parse_family(j["family"], overrides);

    std::vector<Point> points;
    for (size_t i = 0; i < j["nodes"].size(); ++i)
        points.push_back(parse_point(j["nodes"][i], "nodes[" + std::to_string(i) + "]"));
    NodeSet nodes(std::move(points));

    std::optional<CVector> targets;
    if (j.contains("targets")) {
        const json& t = j["targets"];
        if (t.size() != static_cast<size_t>(nodes.size()))
            throw InputError("targets: expected one value per node, got " +
                             std::to_string(t.size()));
        CVector xi(nodes.size());
        for (size_t i = 0; i < t.size(); ++i)
            xi(static_cast<Index>(i)) =
                parse_complex(t[i], "targets[" + std::to_string(i) + "]");
        targets = xi;
    }

    agler::SolveOptions options;
    if (j.contains("options")) {
        const json& o = j["options"];
        if (o.contains("tol")) options.feas_tol = o["tol"].get<double>();
        if (o.contains("cert_margin")) options.cert_margin = o["cert_margin"].get<double>();
        if (o.contains("max_iters")) options.max_iters = o["max_iters"].get<Index>();
    }
    if (overrides.tol) options.feas_tol = *overrides.tol;
    if (overrides.max_iters) options.max_iters = *overrides.max_iters;

    return Problem{std::move(family), std::move(nodes), std::move(targets),
                   std::move(options), format_line_context(j["family"])};
}

Problem load_problem(const std::string& path, const CliOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open problem file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str(), overrides);
}

kernels::DataValues problem_data(const Problem& p) {
    if (!p.targets)
        throw InputError("problem file: 'targets' is required for this command");
    return kernels::DataValues(p.nodes, *p.targets);
}

// ---------------------------------------------------------------------------
// CSV Grams.

CMatrix load_gram_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open gram file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    const Index n = static_cast<Index>(rows.size());
    if (n == 0) throw InputError("gram file '" + path + "' is empty");
    CMatrix k(n, n);
    for (Index i = 0; i < n; ++i) {
        if (rows[static_cast<size_t>(i)].size() != static_cast<size_t>(2 * n))
            throw InputError("gram file row " + std::to_string(i) +
                             ": expected " + std::to_string(2 * n) + " numbers");
        for (Index j = 0; j < n; ++j)
            k(i, j) = Complex(rows[static_cast<size_t>(i)][static_cast<size_t>(2 * j)],
                              rows[static_cast<size_t>(i)][static_cast<size_t>(2 * j + 1)]);
    }
    return k;
}

namespace {

void append_matrix(std::ostream& os, const CMatrix& m) {
    os << std::setprecision(16);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) os << ",";
            os << m(i, j).real() << "," << m(i, j).imag();
        }
        os << "\n";
    }
}

CMatrix read_matrix(std::istream& in, Index rows, Index cols, const std::string& what) {
    CMatrix m(rows, cols);
    std::string line;
    for (Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw InputError(what + ": truncated matrix block");
        std::stringstream ss(line);
        std::string cell;
        for (Index j = 0; j < cols; ++j) {
            double re, im;
            if (!std::getline(ss, cell, ',')) throw InputError(what + ": short row");
            re = std::stod(cell);
            if (!std::getline(ss, cell, ',')) throw InputError(what + ": short row");
            im = std::stod(cell);
            m(i, j) = Complex(re, im);
        }
    }
    return m;
}

}  // namespace

void save_gram_csv(const std::string& path, const CMatrix& k) {
    std::ostringstream os;
    append_matrix(os, k);
    write_text_atomic(path, os.str());
}

void write_text_atomic(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    if (target.has_parent_path())
        std::filesystem::create_directories(target.parent_path());
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw InputError("cannot write '" + tmp.string() + "'");
        out << content;
    }
    std::filesystem::rename(tmp, target);
}

// ---------------------------------------------------------------------------
// Decompositions.

void save_decomposition(const std::string& path, const agler::AglerDecomposition& dec) {
    std::ostringstream os;
    const Index n = dec.gammas.empty() ? 0 : dec.gammas.front().rows();
    os << "tfpick-decomposition/1\n";
    os << "nodes " << n << "\n";
    os << "members " << dec.gammas.size() << "\n";
    os << std::setprecision(16) << "residual " << dec.residual << "\n";
    for (size_t j = 0; j < dec.gammas.size(); ++j) {
        os << "block " << dec.labels[j] << " " << std::setprecision(16)
           << dec.weights[j] << "\n";
        append_matrix(os, dec.gammas[j]);
    }
    os << "end\n";
    write_text_atomic(path, os.str());
}

agler::AglerDecomposition load_decomposition(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open decomposition file '" + path + "'");
    std::string tok;
    std::getline(in, tok);
    if (tok != "tfpick-decomposition/1")
        throw InputError("decomposition file: unknown format header '" + tok + "'");
    agler::AglerDecomposition dec;
    Index n = 0;
    size_t members = 0;
    std::string line;
    in >> tok >> n;
    if (tok != "nodes") throw InputError("decomposition file: expected 'nodes'");
    in >> tok >> members;
    if (tok != "members") throw InputError("decomposition file: expected 'members'");
    in >> tok >> dec.residual;
    if (tok != "residual") throw InputError("decomposition file: expected 'residual'");
    std::getline(in, line);
    for (size_t j = 0; j < members; ++j) {
        std::string label;
        double weight;
        in >> tok >> label >> weight;
        if (tok != "block") throw InputError("decomposition file: expected 'block'");
        std::getline(in, line);
        dec.labels.push_back(label);
        dec.weights.push_back(weight);
        dec.gammas.push_back(read_matrix(in, n, n, "decomposition block " + label));
    }
    return dec;
}

// ---------------------------------------------------------------------------
// Certificates.

void save_certificate(const std::string& path, const agler::DualCertificate& cert) {
    std::ostringstream os;
    os << "tfpick-certificate/1\n";
    os << "nodes " << cert.kernel.rows() << "\n";
    os << std::setprecision(16) << "kernel_min_eig " << cert.kernel_min_eig << "\n";
    os << std::setprecision(16) << "pick_min_eig " << cert.pick_min_eig << "\n";
    os << "member_min_eigs";
    for (double v : cert.member_min_eigs) os << " " << std::setprecision(16) << v;
    os << "\nkernel\n";
    append_matrix(os, cert.kernel);
    os << "end\n";
    write_text_atomic(path, os.str());
}

agler::DualCertificate load_certificate(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open certificate file '" + path + "'");
    std::string tok, line;
    std::getline(in, tok);
    if (tok != "tfpick-certificate/1")
        throw InputError("certificate file: unknown format header '" + tok + "'");
    agler::DualCertificate cert;
    Index n = 0;
    in >> tok >> n;
    if (tok != "nodes") throw InputError("certificate file: expected 'nodes'");
    in >> tok >> cert.kernel_min_eig;
    if (tok != "kernel_min_eig") throw InputError("certificate file: bad field");
    in >> tok >> cert.pick_min_eig;
    if (tok != "pick_min_eig") throw InputError("certificate file: bad field");
    in >> tok;
    if (tok != "member_min_eigs") throw InputError("certificate file: bad field");
    std::getline(in, line);
    {
        std::stringstream ss(line);
        double v;
        while (ss >> v) cert.member_min_eigs.push_back(v);
    }
    std::getline(in, line);
    if (line != "kernel") throw InputError("certificate file: expected 'kernel'");
    cert.kernel = read_matrix(in, n, n, "certificate kernel");
    return cert;
}

// ---------------------------------------------------------------------------
// Colligations.

void save_colligation(const std::string& path, const realize::Colligation& col,
                      const std::string& family_spec) {
    std::ostringstream os;
    os << "tfpick-colligation/1\n";
    os << "family " << family_spec << "\n";
    os << "env_dim " << col.env_dim() << "\n";
    os << "coords";
    for (Index j : col.member_of_coord()) os << " " << j;
    os << "\nblocks";
    for (auto [member, dim] : col.block_dims())
        os << " " << col.family().label(member) << ":" << dim;
    os << "\nu\n";
    append_matrix(os, col.u());
    os << "end\n";
    write_text_atomic(path, os.str());
}

realize::Colligation load_colligation(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open colligation file '" + path + "'");
    std::string line;
    std::getline(in, line);
    if (line != "tfpick-colligation/1")
        throw InputError("colligation file: unknown format header '" + line + "'");
    std::getline(in, line);
    if (line.rfind("family ", 0) != 0)
        throw InputError("colligation file: expected 'family'");
    std::string family_spec = line.substr(7);
    json fj;
    try {
        fj = json::parse(family_spec);
    } catch (const json::exception& e) {
        throw InputError(std::string("colligation file: bad family spec: ") + e.what());
    }
    TestFamily family = parse_family(fj, {});

    std::string tok;
    Index env = 0;
    in >> tok >> env;
    if (tok != "env_dim") throw InputError("colligation file: expected 'env_dim'");
    in >> tok;
    if (tok != "coords") throw InputError("colligation file: expected 'coords'");
    std::vector<Index> coords(static_cast<size_t>(env));
    for (Index i = 0; i < env; ++i) in >> coords[static_cast<size_t>(i)];
    std::getline(in, line);
    std::getline(in, line);  // blocks summary, informational
    std::getline(in, line);
    if (line != "u") throw InputError("colligation file: expected 'u'");
    CMatrix u = read_matrix(in, env + 1, env + 1, "colligation unitary");
    return realize::Colligation(u, coords, std::make_shared<TestFamily>(family));
}

}  // namespace tfpick::io
