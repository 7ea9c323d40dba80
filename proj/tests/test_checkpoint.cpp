#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "gasim/checkpoint.hpp"
#include "gasim/gmp.hpp"
#include "test_helpers.hpp"

using namespace gasim;
using namespace gasim::testing;

TEST_CASE("tensor container round-trips matrices, vectors and scalars") {
    const std::string path = "/tmp/gasim_test_tensors.bin";
    TensorFile file;
    Matrix m(3, 2);
    m << 1, 2, 3, 4, 5, 6.5;
    Vector v(4);
    v << -1, 0, 0.25, 9;
    file.put("weights", m);
    file.put("bias", v);
    file.put_scalar("count", 42.0);
    file.save(path);

    const TensorFile loaded = TensorFile::load(path);
    CHECK((loaded.get("weights") - m).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.get_vector("bias") - v).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.get_scalar("count") == 42.0);
    CHECK(loaded.contains("weights"));
    CHECK_FALSE(loaded.contains("missing"));
    CHECK_THROWS_AS(loaded.get("missing"), Error);
    std::remove(path.c_str());
}

TEST_CASE("corrupt files are rejected") {
    const std::string path = "/tmp/gasim_test_corrupt.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "definitely not a tensor file";
    }
    CHECK_THROWS_AS(TensorFile::load(path), Error);
    CHECK_THROWS_AS(TensorFile::load("/tmp/gasim_does_not_exist.bin"), Error);
    std::remove(path.c_str());
}

TEST_CASE("GMP parameters survive a save/load cycle bit-exactly") {
    const std::string path = "/tmp/gasim_test_params.bin";
    Rng rng(5);
    const GmpParams params = GmpParams::init(24, 3, rng);
    TensorFile file;
    params.save(file);
    file.save(path);
    const GmpParams loaded = GmpParams::load(TensorFile::load(path));
    CHECK(loaded.depth() == 3);
    CHECK(loaded.profile_dim() == 24);

    // Identical forward behavior on a random instance.
    const SocialGraph g = random_social_graph(rng, 7, 0.5);
    const Matrix s = random_history(rng, 7, 3);
    const Matrix phi_s = random_history(rng, 7, 24);
    const Vector a = GmpModel(params).forward(s, g, phi_s);
    const Vector b = GmpModel(loaded).forward(s, g, phi_s);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
}
