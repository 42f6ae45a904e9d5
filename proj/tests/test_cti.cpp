#include <catch2/catch_amalgamated.hpp>

#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nesoc/cti.hpp"
#include "nesoc/http_client.hpp"
#include "test_support.hpp"

using namespace nesoc;
using namespace nesoc::cti;
using Catch::Matchers::ContainsSubstring;

namespace {

KeywordTable demo_table() {
    std::istringstream in(
        "spearphishing => T1566\n"
        "sudoers => T1548\n"
        "exfiltration => T1048\n");
    return parse_keyword_table(in);
}

const char* kDemoReport =
    "The intruder lured a staff member with a spearphishing link. "
    "Afterwards the sudoers policy was weakened to skip password checks. "
    "Finally the stolen archives left the network, an exfiltration over an "
    "encrypted channel.";

/// Scripted backend: returns canned completions and records every prompt.
struct FakeBackend : CompletionBackend {
    std::vector<std::string> replies;
    std::size_t next = 0;
    std::vector<std::string> prompts;

    std::string complete(const std::string& prompt) override {
        prompts.push_back(prompt);
        if (next >= replies.size()) throw Error("fake backend out of replies");
        return replies[next++];
    }
};

std::string reply(const std::string& symbols) {
    return std::string("PATTERN: ") + allowed_pattern_name() + "\nSYMBOLS: " + symbols + "\n";
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + 1))
        ++n;
    return n;
}

} // namespace

TEST_CASE("technique ids normalize to atom syntax") {
    CHECK(normalize_technique("T1566") == "t1566");
    CHECK(normalize_technique("T1566.001") == "t1566_001");
    CHECK(normalize_technique("t1048") == "t1048");

    CHECK(is_technique_atom("t1566"));
    CHECK(is_technique_atom("t1566_001"));
    CHECK(is_technique_atom("t1"));
    CHECK_FALSE(is_technique_atom("t"));
    CHECK_FALSE(is_technique_atom("t_1"));
    CHECK_FALSE(is_technique_atom("t15a"));
    CHECK_FALSE(is_technique_atom("x1566"));
    CHECK_FALSE(is_technique_atom("t1566_"));
    CHECK_FALSE(is_technique_atom("t1566_0a"));
    CHECK_FALSE(is_technique_atom("T1566"));
}

TEST_CASE("keyword tables parse ordered entries") {
    std::istringstream in(
        "# comment\n"
        "Spearphishing Link => T1566\n"
        "\n"
        "sudoers => T1548.003   # sub-technique\n");
    KeywordTable t = parse_keyword_table(in);
    REQUIRE(t.entries.size() == 2);
    CHECK(t.entries[0].phrase == "spearphishing link");
    CHECK(t.entries[0].technique == "t1566");
    CHECK(t.entries[1].technique == "t1548_003");

    std::istringstream noarrow("phrase T1566\n");
    CHECK_THROWS_AS(parse_keyword_table(noarrow), ParseError);
    std::istringstream nophrase(" => T1566\n");
    CHECK_THROWS_MATCHES(parse_keyword_table(nophrase), ParseError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("empty phrase")));
    std::istringstream badtech("phrase => banana\n");
    CHECK_THROWS_MATCHES(parse_keyword_table(badtech), ParseError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("banana")));
    CHECK_THROWS_AS(load_keyword_table("/nonexistent/table.txt"), Error);
}

TEST_CASE("sentence splitting") {
    auto s = split_sentences("A. B. C.");
    REQUIRE(s.size() == 3);
    CHECK(s[0] == "A.");
    CHECK(s[1] == "B.");
    CHECK(s[2] == "C.");

    CHECK(split_sentences("No terminal punctuation").size() == 1);

    auto runs = split_sentences("Wait... what? Yes!");
    REQUIRE(runs.size() == 3);
    CHECK(runs[0] == "Wait...");
    CHECK(runs[1] == "what?");
    CHECK(runs[2] == "Yes!");

    // punctuation followed by a non-space does not end a sentence
    CHECK(split_sentences("It cost 1.5 million dollars.").size() == 1);

    auto collapsed = split_sentences("Spread over\n\tseveral  lines. Second one.");
    REQUIRE(collapsed.size() == 2);
    CHECK(collapsed[0] == "Spread over several lines.");

    CHECK_THROWS_MATCHES(split_sentences("   \n \t "), Error,
                         Catch::Matchers::MessageMatches(ContainsSubstring("empty report")));
}

TEST_CASE("sentence mapping is first match wins, case-insensitive") {
    std::istringstream in(
        "stolen archives => T1030\n"
        "exfiltration => T1048\n");
    KeywordTable t = parse_keyword_table(in);
    CHECK(map_sentence("The Stolen Archives left, an exfiltration.", t) == "t1030");
    CHECK(map_sentence("an exfiltration event", t) == "t1048");

    try {
        map_sentence("nothing relevant here", t);
        FAIL("expected MappingError");
    } catch (const MappingError& e) {
        CHECK_THAT(e.what(), ContainsSubstring("nothing relevant here"));
        CHECK_THAT(e.what(), ContainsSubstring("'stolen archives'"));
        CHECK_THAT(e.what(), ContainsSubstring("'exfiltration'"));
    }

    KeywordTable empty;
    CHECK_THROWS_AS(map_sentence("anything", empty), Error);
}

TEST_CASE("keyword extraction produces the eventually-chain") {
    ltlf::PlanPattern p = extract_plan(kDemoReport, demo_table());
    CHECK(p.id == "extracted");
    CHECK(ltlf::format(p.formula) == "F (t1566 & X F (t1548 & X F t1048))");

    ltlf::PlanPattern named = extract_plan("A spearphishing wave.", demo_table(), "campaign");
    CHECK(named.id == "campaign");
    CHECK(ltlf::format(named.formula) == "F t1566");
}

TEST_CASE("extraction failures name the sentence and the partial chain") {
    std::string report =
        "A spearphishing link was opened. Something entirely unrelated. "
        "Then exfiltration happened.";
    try {
        extract_plan(report, demo_table());
        FAIL("expected MappingError");
    } catch (const MappingError& e) {
        CHECK_THAT(e.what(), ContainsSubstring("sentence 2 of 3"));
        CHECK_THAT(e.what(), ContainsSubstring("[t1566]"));
        CHECK_THAT(e.what(), ContainsSubstring("unmapped sentence"));
    }
}

TEST_CASE("prompts follow the fixed protocol") {
    ExtractionRequest pair = build_prompt("First thing happened.", "Second thing followed.");
    CHECK_THAT(pair.prompt, ContainsSubstring("ALLOWED_PATTERNS: ExistenceEventuallyOther\n"));
    CHECK_THAT(pair.prompt, ContainsSubstring("ALLOWED_SYMBOLS:"));
    CHECK_THAT(pair.prompt, ContainsSubstring("T1548 (Abuse Elevation Control Mechanism)"));
    CHECK_THAT(pair.prompt, ContainsSubstring("T1556 (Modify Authentication Process)"));
    CHECK_THAT(pair.prompt, ContainsSubstring("SYMBOLS: T1133, T1552\n"));
    CHECK_THAT(pair.prompt, ContainsSubstring("SYMBOLS: T1566\n"));
    CHECK_THAT(pair.prompt, ContainsSubstring("NL: First thing happened.\n"));
    CHECK_THAT(pair.prompt, ContainsSubstring("This leads to: Second thing followed.\n"));
    CHECK(pair.prompt.rfind("PATTERN:") == pair.prompt.size() - 8);
    // one connector in the worked example, one in the query
    CHECK(count_occurrences(pair.prompt, "This leads to:") == 2);

    ExtractionRequest single = build_prompt("Only one thing happened.", std::nullopt);
    CHECK(count_occurrences(single.prompt, "This leads to:") == 1);
    CHECK_THAT(single.prompt, ContainsSubstring("NL: Only one thing happened.\n"));
}

TEST_CASE("reply parsing accepts the protocol and rejects everything else") {
    ExtractionResponse r = parse_extraction_reply(
        "some chatter first\nPATTERN: ExistenceEventuallyOther\nSYMBOLS: T1566, T1548\n");
    CHECK(r.pattern == allowed_pattern_name());
    CHECK(r.symbols == std::vector<std::string>{"t1566", "t1548"});

    CHECK_THROWS_MATCHES(parse_extraction_reply("SYMBOLS: T1566\n"), Error,
                         Catch::Matchers::MessageMatches(ContainsSubstring("missing PATTERN")));
    CHECK_THROWS_MATCHES(
        parse_extraction_reply("PATTERN: ExistenceEventuallyOther\n"), Error,
        Catch::Matchers::MessageMatches(ContainsSubstring("missing SYMBOLS")));
    CHECK_THROWS_MATCHES(
        parse_extraction_reply("PATTERN: SomethingElse\nSYMBOLS: T1566\n"), Error,
        Catch::Matchers::MessageMatches(ContainsSubstring("disallowed pattern")));
    CHECK_THROWS_MATCHES(
        parse_extraction_reply("PATTERN: ExistenceEventuallyOther\nSYMBOLS: T15x6\n"), Error,
        Catch::Matchers::MessageMatches(ContainsSubstring("non-technique")));
    CHECK_THROWS_MATCHES(
        parse_extraction_reply("PATTERN: ExistenceEventuallyOther\nSYMBOLS:\n"), Error,
        Catch::Matchers::MessageMatches(ContainsSubstring("empty SYMBOLS")));
}

TEST_CASE("remote extraction walks sentence pairs and merges on the shared symbol") {
    FakeBackend backend;
    backend.replies = {reply("T1566, T1548"), reply("T1548, T1048")};
    ltlf::PlanPattern p = extract_plan_remote(kDemoReport, backend);
    CHECK(ltlf::format(p.formula) == "F (t1566 & X F (t1548 & X F t1048))");
    REQUIRE(backend.prompts.size() == 2);
    CHECK_THAT(backend.prompts[0], ContainsSubstring("spearphishing link"));
    CHECK_THAT(backend.prompts[0], ContainsSubstring("This leads to: Afterwards the sudoers"));
    CHECK_THAT(backend.prompts[1], ContainsSubstring("NL: Afterwards the sudoers"));
}

TEST_CASE("pairwise conflicts are an error, not a guess") {
    FakeBackend backend;
    backend.replies = {reply("T1566, T1548"), reply("T1059, T1048")};
    CHECK_THROWS_MATCHES(
        extract_plan_remote(kDemoReport, backend), Error,
        Catch::Matchers::MessageMatches(
            ContainsSubstring("pairwise extraction conflict on sentence 2") &&
            ContainsSubstring("'t1548' vs 't1059'")));
}

TEST_CASE("remote extraction validates symbol counts") {
    FakeBackend one;
    one.replies = {reply("T1566, T1548")};
    CHECK_THROWS_MATCHES(extract_plan_remote("Single sentence.", one), Error,
                         Catch::Matchers::MessageMatches(ContainsSubstring("expected 1 symbol")));

    FakeBackend pair;
    pair.replies = {reply("T1566")};
    CHECK_THROWS_MATCHES(extract_plan_remote("First. Second.", pair), Error,
                         Catch::Matchers::MessageMatches(ContainsSubstring("expected 2 symbols")));

    FakeBackend single;
    single.replies = {reply("T1566")};
    ltlf::PlanPattern p = extract_plan_remote("Single sentence.", single);
    CHECK(ltlf::format(p.formula) == "F t1566");
}

TEST_CASE("http backend speaks the completion protocol") {
    httplib::Server server;
    std::string seen_auth = "unset";
    std::string seen_body;
    server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.has_header("Authorization") ? req.get_header_value("Authorization") : "";
        seen_body = req.body;
        nlohmann::json out{{"completion", reply("T1566")}};
        res.set_content(out.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    std::ostringstream audit;
    RemoteConfig cfg;
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/complete";
    cfg.api_key = "sk-test-secret";
    HttpCompletionBackend backend(cfg, &audit);
    std::string completion = backend.complete("the prompt");
    CHECK_THAT(completion, ContainsSubstring("SYMBOLS: T1566"));
    CHECK(seen_auth == "Bearer sk-test-secret");
    CHECK_THAT(seen_body, ContainsSubstring("\"prompt\""));

    std::string log = audit.str();
    CHECK_THAT(log, ContainsSubstring("request /v1/complete"));
    CHECK_THAT(log, ContainsSubstring("response 200"));
    CHECK_THAT(log, !ContainsSubstring("sk-test-secret"));

    // no key -> no Authorization header
    RemoteConfig nokey;
    nokey.endpoint_url = cfg.endpoint_url;
    HttpCompletionBackend anon(nokey);
    anon.complete("x");
    CHECK(seen_auth.empty());

    server.stop();
    worker.join();
}

TEST_CASE("http backend surfaces transport failures distinctly") {
    httplib::Server server;
    server.Post("/http500", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    server.Post("/notjson", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "text/plain");
    });
    server.Post("/wrongshape", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"text\": \"hi\"}", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    std::string base = "http://127.0.0.1:" + std::to_string(port);

    CHECK_THROWS_MATCHES(HttpCompletionBackend({base + "/http500", ""}).complete("p"),
                         TransportError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("500")));
    CHECK_THROWS_AS(HttpCompletionBackend({base + "/notjson", ""}).complete("p"), TransportError);
    CHECK_THROWS_AS(HttpCompletionBackend({base + "/wrongshape", ""}).complete("p"),
                    TransportError);

    server.stop();
    worker.join();

    // connection refused after shutdown
    CHECK_THROWS_AS(HttpCompletionBackend({base + "/http500", ""}).complete("p"), TransportError);

    CHECK_THROWS_AS(HttpCompletionBackend({"127.0.0.1/nope", ""}), Error);
    CHECK_THROWS_AS(HttpCompletionBackend({"", ""}), Error);
}
