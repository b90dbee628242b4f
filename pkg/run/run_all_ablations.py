"""
Runs every ablation study one after the other.
Usage: python run/run_all_ablations.py [--config FILE] [--seeds 0,1,2]
"""
import subprocess
import sys
import time

STUDIES = [
    "ablate-position",
    "ablate-structure",
    "compare-configs",
    "study-norm",
    "study-reg",
    "study-failure",
]


def run_study(verb, extra):
    print(f"\n{'=' * 70}")
    print(f"🚀 LAUNCHING: {verb}")
    print(f"{'=' * 70}\n")
    try:
        subprocess.run([sys.executable, "-m", "peft_forge", verb, *extra], check=True)
        print(f"\n✅ {verb} finished")
        return True
    except subprocess.CalledProcessError as e:
        print(f"\n❌ {verb} failed: {e}")
        return False


def main(argv=None):
    extra = list(sys.argv[1:] if argv is None else argv)
    print("=" * 70)
    print("🔥 ADAPTER ABLATIONS - FULL RUN")
    print("=" * 70)
    print(f"📊 {len(STUDIES)} studies to run")
    print("=" * 70)

    start_time = time.time()
    success_count = 0
    for i, verb in enumerate(STUDIES, 1):
        print(f"\n📍 Progress: {i}/{len(STUDIES)}")
        if run_study(verb, extra):
            success_count += 1

    elapsed = time.time() - start_time
    print("\n" + "=" * 70)
    print("✅ ABLATIONS DONE")
    print("=" * 70)
    print(f"⏱️  Total time: {elapsed / 60:.1f} minutes")
    print(f"📊 Succeeded: {success_count}/{len(STUDIES)}")
    print("📈 Summaries: <out>.summary.csv next to each result file")
    print("=" * 70)
    return 0 if success_count == len(STUDIES) else 1


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n⚠️ Interrupted by user")
        sys.exit(1)
