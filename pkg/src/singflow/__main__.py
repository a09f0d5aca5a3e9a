from singflow.cli import main

raise SystemExit(main())
