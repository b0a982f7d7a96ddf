#!/usr/bin/env python3
"""
RunPod Serverless Handler - differential advising simulator
One job runs one experiment, one sweep or the verification suite and
returns CSV text, so sweeps can be spread over serverless workers.

Job input:
  {"action": "run", "config": {...key: value...}, "preset": "grid-desk"}
  {"action": "sweep", "config": {...}, "axis": "agents", "values": ["2", "3"]}
  {"action": "verify", "trials": 100000}
  {"action": "health_check"}
"""

import os
import sys
import traceback
from typing import Any, Dict

import runpod
from loguru import logger

from harness import aggregate_to_csv, rows_to_csv, run_experiment, sweep
from sim_config import ConfigError, ExperimentConfig, apply_env_overrides, config_from_mapping, preset_config
from verify import VerificationParams, verify

HANDLER_VERSION = "dasim_v1.0"
ACTIONS = ("run", "sweep", "verify", "health_check")


def check_environment() -> Dict[str, Any]:
    """Interpreter and library versions, for debugging worker images"""
    env_info = {"python_version": sys.version, "working_directory": os.getcwd()}
    for module in ("numpy", "scipy", "tqdm", "loguru"):
        try:
            env_info[f"{module}_version"] = __import__(module).__version__
        except (ImportError, AttributeError):
            env_info[f"{module}_version"] = None
    return env_info


def job_config(job_input: Dict[str, Any]) -> ExperimentConfig:
    base = preset_config(job_input["preset"]) if job_input.get("preset") else ExperimentConfig()
    return apply_env_overrides(config_from_mapping(job_input.get("config", {}), base))


def handler(job):
    """Main RunPod serverless handler; never raises"""
    try:
        job_input = job.get('input', {})
        action = job_input.get('action', 'run')
        logger.info(f"🚀 job action: {action}")

        if action == "health_check":
            return health_check()

        if action not in ACTIONS:
            return {"status": "error", "error": f"unknown action '{action}'", "actions": list(ACTIONS)}

        if action == "verify":
            params = VerificationParams(trials=int(job_input.get("trials", 100_000)),
                                        seed=int(job_input.get("seed", 2024)),
                                        bandit_reps=int(job_input.get("bandit_reps", 100)))
            report = verify(params)
            return {"status": "success" if report.passed else "failed", "report": report.to_dict(),
                    "text": report.to_text()}

        config = job_config(job_input)
        if action == "sweep":
            values = [str(v) for v in job_input.get("values", [])]
            csv_text = sweep(config, job_input.get("axis", ""), values, progress=False)
            return {"status": "success", "sweep_csv": csv_text}

        result = run_experiment(config, progress=False)
        return {
            "status": "success",
            "config": result.config.to_mapping(),
            "metrics_csv": rows_to_csv(result.rows),
            "aggregate_csv": aggregate_to_csv(result.aggregate),
        }

    except ConfigError as e:
        logger.error(f"❌ Config error: {e}")
        return {"status": "error", "error": str(e), "key": e.key}
    except Exception as e:
        error_trace = traceback.format_exc()
        logger.error(f"❌ Handler Error: {e}")
        return {
            "status": "error",
            "error": str(e),
            "traceback": error_trace[-2000:],
            "handler_version": HANDLER_VERSION,
        }


def health_check():
    """Standalone health check: a one-replica load run must complete"""
    try:
        config = ExperimentConfig(scenario="load", runs=1, rounds=1, round_length=5)
        rows = run_experiment(config, progress=False).rows
        return {
            "status": "healthy" if len(rows) == 1 else "unhealthy",
            "environment": check_environment(),
            "handler_version": HANDLER_VERSION,
        }
    except Exception as e:
        return {"status": "unhealthy", "error": str(e)}


if __name__ == "__main__":
    logger.info("🤖 Starting differential advising serverless worker")
    runpod.serverless.start({"handler": handler})
