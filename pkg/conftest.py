import sys
from pathlib import Path

# cli.py and mcp_server.py live at the repository root
sys.path.insert(0, str(Path(__file__).parent))
