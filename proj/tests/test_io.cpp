#include "smnarx/smnarx.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace smnarx;

TEST(Io, DatasetRoundTrip)
{
    const TrajectoryDataset d = split_dataset(simulate(benchmark_system(), 1000, 3), 600, 200, 200, 250);
    const std::string csv = dataset_to_csv(d);
    std::istringstream in(csv);
    const TrajectoryDataset back = dataset_from_csv(in);
    ASSERT_EQ(back.segments.size(), d.segments.size());
    for (std::size_t s = 0; s < d.segments.size(); ++s) {
        EXPECT_EQ(back.segments[s].y, d.segments[s].y);
        EXPECT_EQ(back.segments[s].u, d.segments[s].u);
        EXPECT_EQ(back.segments[s].modes, d.segments[s].modes);
        EXPECT_EQ(back.segments[s].split, d.segments[s].split);
        EXPECT_EQ(back.segments[s].start, d.segments[s].start);
    }
    EXPECT_EQ(dataset_to_csv(back), csv);
}

TEST(Io, DatasetHeaderAndModes)
{
    const TrajectoryDataset d = simulate(benchmark_system(), 10, 3);
    const std::string csv = dataset_to_csv(d);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,segment,split,u1,y,z");
    const std::string no_z = dataset_to_csv(d, false);
    EXPECT_EQ(no_z.substr(0, no_z.find('\n')), "k,segment,split,u1,y");
    std::istringstream in(no_z);
    EXPECT_FALSE(dataset_from_csv(in).has_modes());
}

TEST(Io, DatasetErrors)
{
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return dataset_from_csv(in);
    };
    EXPECT_THROW(parse(""), DataError);
    EXPECT_THROW(parse("a,b,c\n"), DataError);
    EXPECT_THROW(parse("k,segment,split,u1,y\n1,0,train,0.1\n"), DataError);
    EXPECT_THROW(parse("k,segment,split,u1,y\n1,0,train,x,0.2\n"), DataError);
    EXPECT_THROW(parse("k,segment,split,u1,y\n1,0,train,0.1,0.2\n3,0,train,0.1,0.2\n"), DataError);
    EXPECT_THROW(parse("k,segment,split,u1,y\n1,0,bogus,0.1,0.2\n"), Error);
    EXPECT_THROW(parse("k,segment,split,u1,y,z\n1,0,train,0.1,0.2,0\n"), DataError);
    EXPECT_NO_THROW(parse("k,segment,split,u1,u2,y\n1,0,train,0.1,0.3,0.2\n"));
    EXPECT_THROW(read_dataset_csv("/nonexistent/file.csv"), DataError);
}

TEST(Io, ModelRoundTrip)
{
    const TrueSystem sys = benchmark_system();
    SmnarxModel m = sys.as_model();
    m.sigma2 = 0.0123456789012345678;
    const SmnarxModel back = model_from_json(json::parse(model_to_json(m).dump()));
    EXPECT_EQ(back.theta, m.theta);
    EXPECT_EQ(back.A, m.A);
    EXPECT_EQ(back.Pi, m.Pi);
    EXPECT_EQ(back.sigma2, m.sigma2);
    EXPECT_TRUE(back.basis == m.basis);
}

TEST(Io, SystemRoundTripAndValidation)
{
    const TrueSystem sys = benchmark_system();
    json j = system_to_json(sys);
    const TrueSystem back = system_from_json(j);
    EXPECT_EQ(back.theta, sys.theta);
    EXPECT_EQ(back.noise_std, sys.noise_std);
    EXPECT_EQ(back.input_law.lo, sys.input_law.lo);
    // a system file is also a valid model file
    EXPECT_EQ(model_from_json(j).theta, sys.theta);

    j["A"][0][0] = 0.5;
    EXPECT_THROW(system_from_json(j), ConfigError);
    j = system_to_json(sys);
    j["basis"]["terms"][3] = std::vector<int>{9, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_THROW(system_from_json(j), ConfigError);
    j = system_to_json(sys);
    j["theta"][0][0]["index"] = 500;
    EXPECT_THROW(system_from_json(j), DataError);
}

TEST(Io, DiagnosticCsvs)
{
    const TrueSystem sys = benchmark_system();
    const TrajectoryDataset d = split_dataset(simulate(sys, 450, 3), 400, 50, 0, 200);
    const std::string post = posterior_csv(sys.as_model(), d.subset(Split::train));
    std::istringstream in(post);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "k,segment,gamma_1,gamma_2,gamma_3,f_1,f_2,f_3,yhat");
    int rows = 0;
    while (std::getline(in, line))
        ++rows;
    EXPECT_EQ(rows, 392);

    std::vector<CoefficientSnapshot> snaps{{1, sys.theta}, {2, sys.theta}};
    const std::string path = coefficient_path_csv(snaps);
    EXPECT_EQ(std::count(path.begin(), path.end(), '\n'), 1 + 2 * 12);

    const std::string trace = mode_trace_csv({{5, 0, 2, 1}, {6, 0, -1, 0}});
    EXPECT_EQ(trace, "k,segment,true_mode,predicted_mode\n5,0,3,2\n6,0,,1\n");
}

TEST(Io, FormatDoubleRoundTrips)
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789})
        EXPECT_EQ(parse_double(format_double(v), "v"), v);
}
