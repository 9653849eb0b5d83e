"""
结果文件读写工具函数

所有路径相对于本次运行的输出目录（默认 settings.OUTPUT_DIR）。
包含：JSON / CSV 写入、运行清单 manifest.json、输出文件列表。
输出中不写入任何时间戳，同一配置与种子的两次运行产生逐字节相同的文件。
"""
import json
import math
import os
from importlib import metadata
from typing import Any, Optional

import numpy as np
import pandas as pd

from config import settings

MANIFEST_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "simpy", "joblib")


# ============================================================
# 路径
# ============================================================


def output_path(file_path: str, out_dir: Optional[str] = None) -> str:
    """返回输出目录下的完整路径，并确保父目录存在。"""
    root = out_dir or settings.OUTPUT_DIR
    full_path = os.path.join(root, file_path)
    parent = os.path.dirname(full_path)
    os.makedirs(parent if parent else root, exist_ok=True)
    return full_path


# ============================================================
# JSON / CSV
# ============================================================


def to_jsonable(value: Any) -> Any:
    """递归转换为可序列化对象；NaN / ±inf 写为 null。"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(file_path: str, data: Any, out_dir: Optional[str] = None) -> str:
    """将数据写为 JSON 文件。

    Args:
        file_path: 文件路径，相对于输出目录（如 'equilibrium.json'）
        data: 可序列化的数据（numpy 类型会被转换）
        out_dir: 输出目录，默认 settings.OUTPUT_DIR

    Returns:
        写入的完整路径
    """
    full_path = output_path(file_path, out_dir)
    with open(full_path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, ensure_ascii=False, indent=2, allow_nan=False)
        f.write("\n")
    return full_path


def write_csv(file_path: str, frame: pd.DataFrame, out_dir: Optional[str] = None) -> str:
    """将表格写为 UTF-8 CSV（不含索引）。"""
    full_path = output_path(file_path, out_dir)
    frame.to_csv(full_path, index=False, encoding="utf-8")
    return full_path


def read_json(file_path: str, out_dir: Optional[str] = None) -> Any:
    full_path = os.path.join(out_dir or settings.OUTPUT_DIR, file_path)
    with open(full_path, "r", encoding="utf-8") as f:
        return json.load(f)


# ============================================================
# 运行清单
# ============================================================


def package_versions() -> dict[str, str]:
    versions = {}
    for name in MANIFEST_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_manifest(command: str, config: dict, out_dir: Optional[str] = None,
                   files: Optional[list[str]] = None) -> str:
    """写入 config.json 与 manifest.json：命令、解析后的配置、种子、依赖版本与产出文件。

    Args:
        command: 子命令名
        config: 解析后的完整配置（RunConfig.model_dump()）
        out_dir: 输出目录
        files: 本次运行写出的文件（相对路径），默认扫描输出目录

    Returns:
        写入的完整路径
    """
    root = out_dir or settings.OUTPUT_DIR
    write_json("config.json", config, root)
    if files is None:
        files = [f for f in list_output_files(root) if f != "manifest.json"]
    manifest = {
        "command": command,
        "seed": config.get("seed"),
        "config": config,
        "versions": package_versions(),
        "files": sorted(files),
        "rerun": f"python main.py {command} --config config.json",
    }
    return write_json("manifest.json", manifest, root)


def list_output_files(out_dir: Optional[str] = None) -> list[str]:
    """列出输出目录中的所有文件（相对路径，已排序）。"""
    root = out_dir or settings.OUTPUT_DIR
    if not os.path.exists(root):
        return []
    files = []
    for current, _dirs, filenames in os.walk(root):
        for filename in filenames:
            files.append(os.path.relpath(os.path.join(current, filename), root))
    return sorted(files)
