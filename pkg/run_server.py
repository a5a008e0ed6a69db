"""
Simple script to run the mock translation server
"""
import os
import uvicorn

if __name__ == "__main__":
    port = int(os.getenv("TRANSLATION_SERVER_PORT", "8000"))
    print("\n" + "=" * 70)
    print("Mock Translation Server")
    print("=" * 70)
    print(f"Server URL: http://localhost:{port}")
    print(f"API Docs: http://localhost:{port}/docs")
    print("Rate it with: python main.py rate --service config/services/loopback_http.json")
    print("=" * 70 + "\n")

    uvicorn.run(
        "translation_server:app",
        host="127.0.0.1",
        port=port,
        reload=False,
        log_level="info"
    )
