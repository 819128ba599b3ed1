import logging
import os

from rich.console import Console
from rich.logging import RichHandler

# 日志与进度条写到 stderr，stdout 只留给数据输出
console = Console(stderr=True)

logging.basicConfig(
    level=os.getenv("FINSLER_LOG_LEVEL", "INFO").upper(),
    format="%(message)s",
    datefmt="[%X]",
    handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
)

log = logging.getLogger("finsler")
if os.getenv("DEVELOPMENT") is not None:
    log.setLevel(logging.DEBUG)
