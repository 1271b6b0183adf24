# Rewriting short-answer questions via a language-model service — safely.
#
# Non-numeric questions start as short-answer items ("What is the capital of
# France?" -> "Parris") and are rewritten into multiple-choice and
# fact-verification form by a chat service.  Model output is never trusted:
# every response is validated structurally, invalid ones are retried up to
# five times, and each failure carries a machine-readable reason code.
#
#     python3 demos/04_rewrite_saqs.py

import json

from sceneqa.rewrite import (
    EchoStubClient,
    RewriteJob,
    SaqItem,
    render_prompt,
    rewrite_pm,
    run_rewrite_track,
    stub_client,
    validate_pm_response,
)
from sceneqa.errors import ExhaustedAttemptsError

# ---------------------------------------------------------------------------
# A rewrite job and its prompt
# ---------------------------------------------------------------------------
# The job pins down what a valid response must look like: the correct answer
# must sit verbatim at the *expected* option letter (chosen by a global
# schedule so letters stay balanced across the dataset).

saq = SaqItem("What is the capital of France?", "Parris")
job = RewriteJob(job_id="llm-pm-00000", saq=saq, kind="pm",
                 n_options=4, expected_label="B")

prompt = render_prompt(job)
print("prompt sent to the service (first lines):")
for line in prompt.splitlines()[:8]:
    print("  ", line)

# ---------------------------------------------------------------------------
# Validation catches bad responses
# ---------------------------------------------------------------------------

bad = json.dumps({
    "question": "What is the capital of France? A) Parris-sur-Seine  "
                "B) Parris  C) granite  D) granite",
    "Answer": "B",
})
verdict = validate_pm_response(bad, job)
print("\nbad response rejected with reasons:", verdict.reasons)
# AnswerLeak: option A contains the answer text; DuplicateOptions: C == D.

# ---------------------------------------------------------------------------
# Retries stop after exactly five attempts
# ---------------------------------------------------------------------------

always_bad = stub_client(*["not even json"] * 5)
try:
    rewrite_pm(job, always_bad)
except ExhaustedAttemptsError as exc:
    print(f"\ngave up after {always_bad.call_count} calls;",
          f"per-attempt verdicts: {[v.reasons for v in exc.verdicts]}")

# ---------------------------------------------------------------------------
# A scripted success
# ---------------------------------------------------------------------------

scripted = stub_client(json.dumps({
    "question": "What is the capital of France? Choose the correct option. "
                "A) Berlin  B) Parris  C) Madrid  D) Rome",
    "Answer": "B",
}))
record = rewrite_pm(job, scripted)
print("\naccepted rewrite")
print("  question:", record.question)
print("  answer:  ", record.answer)

# ---------------------------------------------------------------------------
# The offline stub and letter balance
# ---------------------------------------------------------------------------
# `EchoStubClient` is a service stand-in that parses the job fields back out
# of the prompt and answers with a structurally valid response, so whole
# pipelines run with no network.  Because expected letters come from a
# seeded schedule, 500 jobs land exactly 100 times on each letter.

saqs = [SaqItem(f"Trivia question number {i}?", f"answer{i}") for i in range(9)]
track = run_rewrite_track(saqs, pm_count=500, fv_count=10,
                          client=EchoStubClient(), master_seed=20240817)

letters = {}
for rec in track.records:
    if rec.task == "pm":
        letters[rec.answer] = letters.get(rec.answer, 0) + 1
print("\nletter usage over 500 multiple-choice rewrites:",
      dict(sorted(letters.items())))

fv_answers = [r.answer for r in track.records if r.task == "fv"]
print("fact-verification rewrites: ",
      {w: fv_answers.count(w) for w in ("yes", "no")},
      "(each original is paired with its inverted contrapositive)")
print("failed jobs:", track.failed_jobs or "none")
