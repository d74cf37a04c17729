#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "contactfit/errors.hpp"
#include "contactfit/obj_io.hpp"

using namespace contactfit;
namespace fs = std::filesystem;

TEST_CASE("obj round trip preserves geometry to write precision") {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Eigen::MatrixX3d v(10, 3);
    for (int i = 0; i < 10; ++i) v.row(i) << u(rng), u(rng), u(rng);
    Eigen::MatrixX3i f(4, 3);
    f << 0, 1, 2, 2, 1, 3, 4, 5, 6, 7, 8, 9;

    const fs::path p = fs::temp_directory_path() / "rt.obj";
    save_obj(p, v, f);
    const auto [v2, f2] = load_obj(p);
    REQUIRE(v2.rows() == 10);
    REQUIRE(f2.rows() == 4);
    CHECK((v2 - v).cwiseAbs().maxCoeff() < 1e-6);  // %.6f writer
    CHECK((f2 - f).cwiseAbs().maxCoeff() == 0);
    fs::remove(p);
}

TEST_CASE("loader accepts comments, blank lines, and slash face forms") {
    const fs::path p = fs::temp_directory_path() / "forms.obj";
    std::ofstream out(p);
    out << "# header comment\n\n"
           "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
           "vn 0 0 1\n"             // ignored
           "f 1/1/1 2/2/1 3/3/1\n"  // texture/normal indices stripped
           "f 1//1 2//1 3//1\n";
    out.close();
    const auto [v, f] = load_obj(p);
    CHECK(v.rows() == 3);
    REQUIRE(f.rows() == 2);
    CHECK(f(0, 0) == 0);
    CHECK(f(1, 2) == 2);
    fs::remove(p);
}

TEST_CASE("loader rejects malformed content") {
    const fs::path p = fs::temp_directory_path() / "bad.obj";

    auto write = [&](const char* text) {
        std::ofstream out(p);
        out << text;
    };

    write("v 1 2\n");  // vertex with two coordinates
    CHECK_THROWS_AS(load_obj(p), ParseError);

    write("v 0 0 0\nf 1 2\n");  // face with two vertices
    CHECK_THROWS_AS(load_obj(p), ParseError);

    write("v 0 0 0\nf 1 2 9\n");  // face index out of range
    CHECK_THROWS_AS(load_obj(p), ParseError);

    write("v 0 0 0\nf 0 1 1\n");  // zero is not a valid 1-based index
    CHECK_THROWS_AS(load_obj(p), ParseError);

    CHECK_THROWS_AS(load_obj(fs::temp_directory_path() / "missing.obj"), ValidationError);
    fs::remove(p);
}
