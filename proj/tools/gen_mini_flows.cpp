// Generates the bundled miniature flow dataset. Deterministic: a fixed
// seed produces the committed CSV byte for byte.
//
// Planted structure, mirroring the class geometry the axioms care about:
//   - benign web traffic to the two web servers (ports 80/443)
//   - clean benign service traffic (DNS/SSH/RDP) that falls into NWS
//   - "confusable" benign NWS flows on non-web ports numerically adjacent
//     to 80, with features drawn from shifted attack distributions, so a
//     label-only learner flags some of them while the NWS axiom suppresses
//     them
//   - brute-force and XSS flows against the web servers

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "nesoc/rng.hpp"

namespace {

using nesoc::rng::below;
using nesoc::rng::uniform01;

// Box-Muller, single draw per call for simple determinism.
double normal(std::mt19937_64& gen, double mu, double sigma) {
    double u1 = uniform01(gen);
    double u2 = uniform01(gen);
    if (u1 < 1e-300) u1 = 1e-300;
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    return mu + sigma * z;
}

long pos_normal(std::mt19937_64& gen, double mu, double sigma, double lo) {
    return static_cast<long>(std::max(lo, normal(gen, mu, sigma)));
}

long randint(std::mt19937_64& gen, long lo, long hi) {  // inclusive
    return lo + static_cast<long>(below(gen, static_cast<std::uint64_t>(hi - lo + 1)));
}

struct Row {
    std::string src_ip, dst_ip;
    long sport, dport, proto, duration, fwd, bwd, fwd_hdr, bwd_hdr, psh, fin, bwd_min, iwf, iwb;
    std::string label;
};

std::string host(const char* prefix, long n) { return std::string(prefix) + std::to_string(n); }

Row benign_web(std::mt19937_64& g) {
    Row r;
    r.src_ip = host("192.168.10.", randint(g, 5, 45));
    r.sport = randint(g, 32768, 60999);
    bool https = uniform01(g) < 0.3;
    r.dst_ip = https ? "192.168.10.51" : "192.168.10.50";
    r.dport = https ? 443 : 80;
    r.proto = 6;
    r.duration = pos_normal(g, 2.5e6, 1.2e6, 5e4);
    r.fwd = pos_normal(g, 15000, 6000, 500);
    r.bwd = pos_normal(g, 40000, 15000, 1000);
    r.fwd_hdr = pos_normal(g, 400, 150, 40);
    r.bwd_hdr = pos_normal(g, 600, 200, 40);
    r.psh = randint(g, 2, 12);
    r.fin = randint(g, 0, 2);
    r.bwd_min = randint(g, 0, 80);
    r.iwf = (uniform01(g) < 0.5) ? 65535 : (uniform01(g) < 0.5 ? 29200 : 8192);
    r.iwb = (uniform01(g) < 0.5) ? 65535 : (uniform01(g) < 0.5 ? 28960 : 14600);
    r.label = "BENIGN";
    return r;
}

Row benign_service(std::mt19937_64& g) {
    Row r;
    r.src_ip = host("192.168.10.", randint(g, 5, 45));
    r.sport = randint(g, 32768, 60999);
    double kind = uniform01(g);
    if (kind < 0.4) {  // DNS
        r.dst_ip = "192.168.10.3";
        r.dport = 53;
        r.proto = 17;
        r.duration = pos_normal(g, 3e4, 1.5e4, 1e3);
        r.fwd = pos_normal(g, 80, 25, 30);
        r.bwd = pos_normal(g, 220, 80, 40);
        r.fwd_hdr = randint(g, 16, 32);
        r.bwd_hdr = randint(g, 16, 32);
        r.psh = 0;
        r.fin = 0;
        r.bwd_min = randint(g, 40, 90);
        r.iwf = 0;
        r.iwb = 0;
    } else if (kind < 0.75) {  // SSH
        r.dst_ip = "192.168.10.60";
        r.dport = 22;
        r.proto = 6;
        r.duration = pos_normal(g, 8e5, 3e5, 5e4);
        r.fwd = pos_normal(g, 3000, 1000, 300);
        r.bwd = pos_normal(g, 4000, 1200, 300);
        r.fwd_hdr = pos_normal(g, 240, 70, 40);
        r.bwd_hdr = pos_normal(g, 260, 70, 40);
        r.psh = randint(g, 3, 8);
        r.fin = randint(g, 0, 1);
        r.bwd_min = randint(g, 0, 36);
        r.iwf = 29200;
        r.iwb = 26883;
    } else {  // RDP
        r.dst_ip = "192.168.10.61";
        r.dport = 3389;
        r.proto = 6;
        r.duration = pos_normal(g, 1.2e6, 4e5, 1e5);
        r.fwd = pos_normal(g, 6000, 2000, 600);
        r.bwd = pos_normal(g, 9000, 3000, 800);
        r.fwd_hdr = pos_normal(g, 320, 90, 40);
        r.bwd_hdr = pos_normal(g, 340, 90, 40);
        r.psh = randint(g, 2, 7);
        r.fin = randint(g, 0, 1);
        r.bwd_min = randint(g, 0, 48);
        r.iwf = 65535;
        r.iwb = 65535;
    }
    r.label = "BENIGN";
    return r;
}

Row brute_force(std::mt19937_64& g) {
    Row r;
    r.src_ip = host("172.16.0.", randint(g, 1, 30));
    r.sport = randint(g, 40000, 60999);
    r.dst_ip = "192.168.10.50";
    r.dport = 80;
    r.proto = 6;
    r.duration = pos_normal(g, 5e4, 2e4, 2e3);
    r.fwd = pos_normal(g, 350, 90, 60);
    r.bwd = pos_normal(g, 900, 250, 100);
    r.fwd_hdr = pos_normal(g, 120, 30, 40);
    r.bwd_hdr = pos_normal(g, 140, 40, 40);
    r.psh = randint(g, 0, 1);
    r.fin = randint(g, 1, 2);
    r.bwd_min = randint(g, 0, 8);
    r.iwf = randint(g, 170, 300);
    r.iwb = pos_normal(g, 235, 60, 64);
    r.label = "Web Attack - Brute Force";
    return r;
}

Row xss(std::mt19937_64& g) {
    Row r;
    r.src_ip = host("172.16.1.", randint(g, 1, 30));
    r.sport = randint(g, 40000, 60999);
    r.dst_ip = "192.168.10.50";
    r.dport = 80;
    r.proto = 6;
    r.duration = pos_normal(g, 8e5, 2.5e5, 1e5);
    r.fwd = pos_normal(g, 2200, 500, 800);
    r.bwd = pos_normal(g, 4500, 1200, 600);
    r.fwd_hdr = pos_normal(g, 200, 50, 40);
    r.bwd_hdr = pos_normal(g, 260, 60, 40);
    r.psh = randint(g, 1, 3);
    r.fin = 1;
    r.bwd_min = randint(g, 0, 20);
    r.iwf = pos_normal(g, 29200, 1500, 1000);
    r.iwb = pos_normal(g, 29200, 1500, 1000);
    r.label = "Web Attack - XSS";
    return r;
}

// Benign flows on non-web ports whose bulk features sit in an attack
// distribution. Half are near-clones of an attack row: every feature matches
// except a modest init-window shift, so only persistent pressure on exactly
// these rows separates them. The rest keep the attack's heavy-tailed bulk
// features but sit a few sigma away on the mid-scale ones (init windows,
// backward packet minimum, PSH count). Ports are numerically next to 80 and
// nearly vanish under min-max normalization.
Row confusable(std::mt19937_64& g, bool bf_like) {
    bool clone = below(g, 100) < 50;
    Row r = bf_like ? brute_force(g) : xss(g);
    r.src_ip = host("192.168.10.", randint(g, 5, 45));
    r.sport = randint(g, 32768, 60999);
    r.dst_ip = (uniform01(g) < 0.5) ? "192.168.10.70" : "192.168.10.71";
    const long ports[4] = {81, 85, 88, 90};
    r.dport = ports[below(g, 4)];
    r.label = "BENIGN";
    if (clone) {
        long shift = bf_like ? 1500 : 8000;
        r.iwf += shift;
        r.iwb += shift;
    } else if (bf_like) {
        r.psh = randint(g, 1, 3);
        r.fin = randint(g, 0, 2);
        r.bwd_min = pos_normal(g, 25, 10, 0);
        r.iwf = pos_normal(g, 5000, 1500, 500);
        r.iwb = pos_normal(g, 5000, 1500, 500);
    } else {
        r.psh = randint(g, 2, 4);
        r.fin = randint(g, 0, 1);
        r.bwd_min = randint(g, 15, 45);
        r.iwf = pos_normal(g, 21500, 3000, 1000);
        r.iwb = pos_normal(g, 21500, 3000, 1000);
    }
    return r;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: gen_mini_flows <output.csv>\n";
        return 2;
    }
    std::mt19937_64 gen(42);
    std::vector<Row> rows;
    for (int i = 0; i < 1000; ++i) rows.push_back(benign_web(gen));
    for (int i = 0; i < 460; ++i) rows.push_back(benign_service(gen));
    for (int i = 0; i < 120; ++i) rows.push_back(confusable(gen, true));
    for (int i = 0; i < 120; ++i) rows.push_back(confusable(gen, false));
    for (int i = 0; i < 130; ++i) rows.push_back(brute_force(gen));
    for (int i = 0; i < 130; ++i) rows.push_back(xss(gen));
    nesoc::rng::shuffle(rows, gen);

    std::ofstream out(argv[1]);
    if (!out) {
        std::cerr << "cannot write " << argv[1] << "\n";
        return 1;
    }
    out << "Source IP,Source Port,Destination IP,Destination Port,Protocol,Flow Duration,"
           "Total Length of Fwd Packets,Total Length of Bwd Packets,Fwd Header Length,"
           "Bwd Header Length,Fwd PSH Flags,FIN Flag Count,Bwd Packet Length Min,"
           "Init_Win_bytes_forward,Init_Win_bytes_backward,Subflow Fwd Bytes,Label\n";
    for (const Row& r : rows)
        out << r.src_ip << ',' << r.sport << ',' << r.dst_ip << ',' << r.dport << ',' << r.proto
            << ',' << r.duration << ',' << r.fwd << ',' << r.bwd << ',' << r.fwd_hdr << ','
            << r.bwd_hdr << ',' << r.psh << ',' << r.fin << ',' << r.bwd_min << ',' << r.iwf
            << ',' << r.iwb << ',' << r.fwd << ',' << r.label << "\n";
    std::cout << "wrote " << rows.size() << " rows\n";
    return 0;
}
