#pragma once

#include <optional>
#include <string>

#include "tfpick/agler.hpp"
#include "tfpick/realize.hpp"

namespace tfpick::io {

// A parsed problem file: family + nodes + optional targets + solver options.
struct Problem {
    testfns::TestFamily family;
    testfns::NodeSet nodes;
    std::optional<CVector> targets;
    agler::SolveOptions options;
    std::string family_spec;  // one-line JSON, re-embedded in artifact files
};

struct CliOverrides {
    std::optional<double> tol;
    std::optional<Index> max_iters;
    std::optional<Index> grid;
    uint64_t seed = 0;
};

Problem load_problem(const std::string& path, const CliOverrides& overrides = {});
Problem parse_problem(const std::string& text, const CliOverrides& overrides = {});

kernels::DataValues problem_data(const Problem& p);  // throws when targets absent

// Gram matrices as CSV, row-major re,im pairs.
CMatrix load_gram_csv(const std::string& path);
void save_gram_csv(const std::string& path, const CMatrix& k);

// Text artifacts with format-version headers; writes are atomic
// (tmp file + rename).
void save_decomposition(const std::string& path, const agler::AglerDecomposition& dec);
agler::AglerDecomposition load_decomposition(const std::string& path);

void save_certificate(const std::string& path, const agler::DualCertificate& cert);
agler::DualCertificate load_certificate(const std::string& path);

void save_colligation(const std::string& path, const realize::Colligation& col,
                      const std::string& family_spec);
realize::Colligation load_colligation(const std::string& path);

void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace tfpick::io
