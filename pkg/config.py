import copy
import os
from pathlib import Path

import yaml
from dotenv import load_dotenv

from utils.logger import log

class Config:
    def __init__(self):
        # --- 默认配置 ---
        self.defaults = {
            'integration': {
                'step': 1e-3,
                'exp_step': 1e-2,
                'energy_drift_tol': 1e-6,
            },
            'shooting': {
                'tol': 1e-9,
                'max_iterations': 60,
                'multistart': 8,
                'perturbation': 0.5,
            },
            'convexity': {
                'eta_factor': 3.0,
                'samples_per_radius': 16,
                'rank_tol': 1e-3,
            },
            'verify': {
                'concurrency': 4,
                'algebra_flags': 100,
                'energy_flags': 20,
                'chern_flags': 50,
                'gauss_flags': 100,
                'radial_curves': 200,
                'inequality_trials': 200,
                'family_flags': 6,
                'growth_epsilon': 0.2,
                'growth_mus': [0.2, 0.4],
            },
        }
        self.settings = copy.deepcopy(self.defaults)
        self._load_from_file()

        # --- 环境变量 ---
        load_dotenv()
        self.default_seed = int(os.getenv("FINSLER_SEED", "0"))
        self.is_development = os.getenv("DEVELOPMENT") is not None

    def _load_from_file(self):
        config_path = Path.cwd() / "config.yaml"
        if config_path.exists():
            try:
                with open(config_path, 'r', encoding='utf-8') as f:
                    user_config = yaml.safe_load(f) or {}

                # 深度合并
                for key, value in user_config.items():
                    if isinstance(value, dict) and key in self.settings:
                        self.settings[key].update(value)
                    else:
                        self.settings[key] = value
                log.debug("已从 config.yaml 加载自定义配置。")
            except Exception as e:
                log.error(f"加载 config.yaml 失败: {e}")

    @property
    def step(self) -> float:
        return float(self.settings['integration']['step'])

    @property
    def exp_step(self) -> float:
        return float(self.settings['integration']['exp_step'])

    @property
    def energy_drift_tol(self) -> float:
        return float(self.settings['integration']['energy_drift_tol'])

    @property
    def shoot_tol(self) -> float:
        return float(self.settings['shooting']['tol'])

    @property
    def max_newton_iterations(self) -> int:
        return int(self.settings['shooting']['max_iterations'])

    @property
    def multistart(self) -> int:
        return int(self.settings['shooting']['multistart'])

    @property
    def multistart_perturbation(self) -> float:
        return float(self.settings['shooting']['perturbation'])

    @property
    def eta_factor(self) -> float:
        return float(self.settings['convexity']['eta_factor'])

    @property
    def samples_per_radius(self) -> int:
        return int(self.settings['convexity']['samples_per_radius'])

    @property
    def rank_tol(self) -> float:
        return float(self.settings['convexity']['rank_tol'])

    @property
    def verify_concurrency(self) -> int:
        return int(self.settings['verify']['concurrency'])

    @property
    def verify(self) -> dict:
        return self.settings['verify']


# 创建一个全局配置实例
config = Config()
