// Built-in prompt texts, one per role. These are data, not logic: a deployment
// can override any of them by dropping <role>.txt files into a templates
// directory (see TemplateRegistry::from_directory).

#include "tracerag/llm.hpp"

namespace tracerag::llm {

namespace {

constexpr std::string_view kCleanser = R"(You are a Java code cleaner for Android security analysis.

The snippet below comes from decompiled, possibly obfuscated Android code.
Remove dead code, unreachable branches and opaque no-op statements that do not
contribute to execution, and keep only the core logic. Do not rename anything,
do not summarize, and never remove statements that can actually execute.
Return only the cleaned Java code, nothing else.

Code:
{code}
)";

constexpr std::string_view kDescriber = R"(You are a Java code analyst writing retrieval summaries for Android app methods.

Describe the code below in two parts:
1. Core functionality: explain in detail what the code does, including its
   inputs and its outputs.
2. Suspicious indicators: identify and describe any potentially malicious
   intent, listing every suspicious behavior you observe (data access,
   network endpoints, SMS or call usage, privilege use, obfuscation,
   dynamic loading, and similar).

Be concrete and factual; the text is used as a search index for behavior
queries.

Code:
{code}
)";

constexpr std::string_view kAnalyzer = R"(You are a senior Android malware analyst. Investigate the code snippet below
with respect to one behavior question.

Question: {query}

Current snippet (class {class_name}, method {method_name}):
{code}

Snippet description:
{description}

Findings from earlier analysis turns:
{prior_summaries}

Instructions:
- Identify the core behavior of this code and its intent.
- Report every involved code location as a fully qualified path
  (package.Class.method).
- If you need the implementation of another method invoked here before you
  can decide, request it instead of guessing.

End your answer with exactly one fenced block, using one of these two forms.

To conclude:
```
VERDICT: {malicious|benign|inconclusive}
PATHS:
package.Class.method
```
(one PATHS line per involved method; omit PATHS lines only when benign or
inconclusive)

To request another method:
```
FOLLOWUP: method=<name> class=<class> params=<count>
```
)";

constexpr std::string_view kRelevanceReviewer = R"(You review retrieval hits for an Android malware behavior query.

Query: {query}

Candidate snippet:
{code}

Snippet description:
{description}

Decide whether this snippet is actually relevant to the query and indicative
of the suspicious behavior in question. Answer with a one-line verdict,
exactly `VERDICT: KEEP` or `VERDICT: DROP`, optionally followed by a short
reason on the next line.
)";

constexpr std::string_view kCollisionReviewer = R"(Several stored code snippets match a follow-up request for a method
implementation. Pick the one the calling context is actually invoking.

Calling context:
{context}

Candidates:
{candidates}

Answer with exactly one line `CHOICE: <number>` naming the best candidate.
)";

constexpr std::string_view kQueryReviewer = R"(Classify the analyst output below. Does it request the implementation of
another method (a follow-up), or does it state a conclusion?

Output:
{output}

Answer with exactly one line: `CLASSIFICATION: followup` or
`CLASSIFICATION: conclusion`.
)";

constexpr std::string_view kOrganizer = R"(You compile Android malware analysis results into clear, human-readable
report prose.

Task: {task}

Material:
{material}

Write a concise, well-organized narrative grounded strictly in the material.
Do not invent behaviors or code locations that the material does not contain.
)";

} // namespace

std::string_view builtin_template_text(Role r) {
    switch (r) {
    case Role::cleanser: return kCleanser;
    case Role::describer: return kDescriber;
    case Role::analyzer: return kAnalyzer;
    case Role::relevance_reviewer: return kRelevanceReviewer;
    case Role::collision_reviewer: return kCollisionReviewer;
    case Role::query_reviewer: return kQueryReviewer;
    case Role::organizer: return kOrganizer;
    }
    return "";
}

} // namespace tracerag::llm
